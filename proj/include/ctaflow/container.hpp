#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctaflow/flow.hpp"

namespace ctaflow {

/*
 * CTVF container, version 1. All integers are little-endian uint32, all
 * values little-endian IEEE-754 float32.
 *
 *   "CTVF"  version  R  M
 *   R x (nx ny nz)                       level dims, coarsest level first
 *   R*M grids, row-major (level, channel), each nx*ny*nz nodes of (vx vy vz),
 *     node (i,j,k) at position i + nx*(j + ny*k)
 *   "ATTN"  mode  condition_min(f32) condition_max(f32)  L
 *   L x (inputs outputs)
 *   L x (weights[outputs*inputs] row-major, biases[outputs])
 *
 * mode: 0 ctvf, 1 tvf, 2 cvf, 3 svf. The file ends after the last bias.
 */
inline constexpr std::uint32_t kContainerVersion = 1;

std::vector<std::uint8_t> encode_container(const FlowModel& model);
/// Throws FormatError on bad magic, version, truncation or trailing bytes.
FlowModel decode_container(std::span<const std::uint8_t> bytes);

void write_container(const std::filesystem::path& path, const FlowModel& model);
FlowModel read_container(const std::filesystem::path& path);

/// Metadata describing the container layout; `extra` is merged in at top level.
nlohmann::json container_sidecar(const FlowModel& model, const nlohmann::json& extra = nlohmann::json::object());

/// `<container>.json`
std::filesystem::path sidecar_path(const std::filesystem::path& container);

/// Writes the container and its sidecar.
void save_model(const std::filesystem::path& path, const FlowModel& model,
                const nlohmann::json& extra = nlohmann::json::object());

}  // namespace ctaflow
