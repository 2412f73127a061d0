#include "ctaflow/mesh_io.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "ctaflow/errors.hpp"

namespace ctaflow {
namespace {

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out.precision(std::numeric_limits<double>::max_digits10);
  return out;
}

void push_polygon(TriangleMesh& mesh, const std::vector<long>& poly, const std::filesystem::path& path) {
  if (poly.size() < 3) throw FormatError(path.string() + ": polygon with fewer than 3 vertices");
  for (std::size_t i = 1; i + 1 < poly.size(); ++i) {
    mesh.faces.push_back({static_cast<std::uint32_t>(poly[0]), static_cast<std::uint32_t>(poly[i]),
                          static_cast<std::uint32_t>(poly[i + 1])});
  }
}

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

}  // namespace

TriangleMesh read_obj(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  TriangleMesh mesh;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag)) continue;
    if (tag == "#") {
      std::string word;
      if (ss >> word && word == "correspondence") mesh.correspondence = true;
    } else if (tag == "v") {
      Vec3 v;
      if (!(ss >> v.x >> v.y >> v.z)) {
        throw FormatError(path.string() + ":" + std::to_string(lineno) + ": malformed vertex");
      }
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::vector<long> poly;
      std::string token;
      while (ss >> token) {
        long idx = 0;
        try {
          idx = std::stol(token.substr(0, token.find('/')));
        } catch (const std::exception&) {
          throw FormatError(path.string() + ":" + std::to_string(lineno) + ": malformed face index");
        }
        idx = idx < 0 ? static_cast<long>(mesh.vertices.size()) + idx : idx - 1;
        if (idx < 0) throw FormatError(path.string() + ":" + std::to_string(lineno) + ": bad face index");
        poly.push_back(idx);
      }
      push_polygon(mesh, poly, path);
    }
  }
  mesh.validate();
  return mesh;
}

void write_obj(const std::filesystem::path& path, const TriangleMesh& mesh) {
  std::ofstream out = open_out(path);
  if (mesh.correspondence) out << "# correspondence\n";
  for (const Vec3& v : mesh.vertices) out << "v " << v.x << ' ' << v.y << ' ' << v.z << '\n';
  for (const Face& f : mesh.faces) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  if (!out) throw InputError("failed writing " + path.string());
}

TriangleMesh read_ply(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("ply", 0) != 0) throw FormatError(path.string() + ": not a PLY file");

  std::size_t n_vertices = 0;
  std::size_t n_faces = 0;
  std::size_t vertex_props = 0;
  std::string current;
  bool correspondence = false;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string word;
    ss >> word;
    if (word == "format") {
      std::string fmt;
      ss >> fmt;
      if (fmt != "ascii") throw FormatError(path.string() + ": only ascii PLY is supported");
    } else if (word == "comment") {
      std::string tag;
      if (ss >> tag && tag == "correspondence") correspondence = true;
    } else if (word == "element") {
      ss >> current;
      if (current == "vertex") ss >> n_vertices;
      else if (current == "face") ss >> n_faces;
    } else if (word == "property") {
      if (current == "vertex") ++vertex_props;
    } else if (word == "end_header") {
      break;
    }
  }
  if (vertex_props < 3) throw FormatError(path.string() + ": vertex element needs x y z");

  TriangleMesh mesh;
  mesh.correspondence = correspondence;
  mesh.vertices.resize(n_vertices);
  for (std::size_t i = 0; i < n_vertices; ++i) {
    if (!std::getline(in, line)) throw FormatError(path.string() + ": truncated vertex list");
    std::istringstream ss(line);
    if (!(ss >> mesh.vertices[i].x >> mesh.vertices[i].y >> mesh.vertices[i].z)) {
      throw FormatError(path.string() + ": malformed vertex " + std::to_string(i));
    }
  }
  for (std::size_t i = 0; i < n_faces; ++i) {
    if (!std::getline(in, line)) throw FormatError(path.string() + ": truncated face list");
    std::istringstream ss(line);
    std::size_t count = 0;
    ss >> count;
    std::vector<long> poly(count);
    for (long& idx : poly) {
      if (!(ss >> idx)) throw FormatError(path.string() + ": malformed face " + std::to_string(i));
    }
    push_polygon(mesh, poly, path);
  }
  mesh.validate();
  return mesh;
}

void write_ply(const std::filesystem::path& path, const TriangleMesh& mesh) {
  std::ofstream out = open_out(path);
  out << "ply\nformat ascii 1.0\n";
  if (mesh.correspondence) out << "comment correspondence\n";
  out << "element vertex " << mesh.vertices.size() << "\nproperty double x\nproperty double y\nproperty double z\n"
      << "element face " << mesh.faces.size() << "\nproperty list uchar int vertex_indices\nend_header\n";
  for (const Vec3& v : mesh.vertices) out << v.x << ' ' << v.y << ' ' << v.z << '\n';
  for (const Face& f : mesh.faces) out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
  if (!out) throw InputError("failed writing " + path.string());
}

TriangleMesh read_mesh(const std::filesystem::path& path) {
  const std::string ext = lower_extension(path);
  if (ext == ".obj") return read_obj(path);
  if (ext == ".ply") return read_ply(path);
  throw FormatError("unsupported mesh extension '" + ext + "'");
}

void write_mesh(const std::filesystem::path& path, const TriangleMesh& mesh) {
  const std::string ext = lower_extension(path);
  if (ext == ".obj") return write_obj(path, mesh);
  if (ext == ".ply") return write_ply(path, mesh);
  throw FormatError("unsupported mesh extension '" + ext + "'");
}

}  // namespace ctaflow
