#include "coseg/io.hpp"

#include <zlib.h>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace coseg {

namespace {

using json = nlohmann::json;

bool ends_with(const std::string& s, const std::string& suffix) {
  if (s.size() < suffix.size()) return false;
  return std::equal(suffix.rbegin(), suffix.rend(), s.rbegin(),
                    [](char a, char b) {
                      return std::tolower(static_cast<unsigned char>(a)) ==
                             std::tolower(static_cast<unsigned char>(b));
                    });
}

std::vector<unsigned char> read_file_maybe_gz(const std::string& path) {
  gzFile f = gzopen(path.c_str(), "rb");  // reads plain files transparently
  if (!f) throw Error(ErrorKind::io, "cannot open: " + path);
  std::vector<unsigned char> buf;
  char tmp[1 << 16];
  int n;
  while ((n = gzread(f, tmp, sizeof tmp)) > 0)
    buf.insert(buf.end(), tmp, tmp + n);
  const bool bad = n < 0;
  gzclose(f);
  if (bad) throw Error(ErrorKind::io, "decompression failed: " + path);
  return buf;
}

void write_file_maybe_gz(const std::string& path,
                         const std::vector<unsigned char>& bytes) {
  if (ends_with(path, ".gz")) {
    gzFile f = gzopen(path.c_str(), "wb");
    if (!f) throw Error(ErrorKind::io, "cannot open for write: " + path);
    const int n = gzwrite(f, bytes.data(), static_cast<unsigned>(bytes.size()));
    gzclose(f);
    if (n != static_cast<int>(bytes.size()))
      throw Error(ErrorKind::io, "write failed: " + path);
  } else {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error(ErrorKind::io, "cannot open for write: " + path);
    os.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
    if (!os) throw Error(ErrorKind::io, "write failed: " + path);
  }
}

// ---- little-endian scalar packing --------------------------------------

template <class T>
T load_le(const unsigned char* p, bool swap) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char b[sizeof(T)];
  std::memcpy(b, p, sizeof(T));
  if (swap) std::reverse(b, b + sizeof(T));
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

template <class T>
void store_le(std::vector<unsigned char>& out, std::size_t off, T v) {
  std::memcpy(out.data() + off, &v, sizeof(T));
}

// ---- NIfTI-1 -------------------------------------------------------------

constexpr int kNiftiHeaderSize = 348;
constexpr std::int16_t kDtUint8 = 2;
constexpr std::int16_t kDtInt16 = 4;
constexpr std::int16_t kDtFloat32 = 16;

struct NiftiRaw {
  Vec3i dims;
  Vec3 spacing;
  Vec3 origin;
  std::int16_t datatype = 0;
  double scl_slope = 1.0;
  double scl_inter = 0.0;
  std::vector<unsigned char> data;  // native order after swapping
};

NiftiRaw read_nifti_raw(const std::string& path) {
  const auto bytes = read_file_maybe_gz(path);
  if (bytes.size() < kNiftiHeaderSize)
    throw Error(ErrorKind::io, "truncated NIfTI header: " + path);

  bool swap = false;
  std::int16_t dim0 = load_le<std::int16_t>(bytes.data() + 40, false);
  if (dim0 < 1 || dim0 > 7) {
    swap = true;
    dim0 = load_le<std::int16_t>(bytes.data() + 40, true);
    if (dim0 < 1 || dim0 > 7)
      throw Error(ErrorKind::io, "bad NIfTI dim field: " + path);
  }
  const auto sizeof_hdr = load_le<std::int32_t>(bytes.data() + 0, swap);
  if (sizeof_hdr != kNiftiHeaderSize)
    throw Error(ErrorKind::io, "NIfTI sizeof_hdr must be 348: " + path);
  if (std::memcmp(bytes.data() + 344, "n+1", 3) != 0)
    throw Error(ErrorKind::io, "bad NIfTI magic (need single-file n+1): " + path);
  if (dim0 < 3) throw Error(ErrorKind::io, "NIfTI volume must be 3D: " + path);

  NiftiRaw raw;
  for (int a = 0; a < 3; ++a) {
    raw.dims[a] = load_le<std::int16_t>(bytes.data() + 40 + 2 * (a + 1), swap);
    if (raw.dims[a] < 1) throw Error(ErrorKind::io, "bad NIfTI dims: " + path);
  }
  for (int a = 4; a <= dim0; ++a)
    if (load_le<std::int16_t>(bytes.data() + 40 + 2 * a, swap) > 1)
      throw Error(ErrorKind::io, "NIfTI has more than 3 dimensions: " + path);

  raw.datatype = load_le<std::int16_t>(bytes.data() + 70, swap);
  if (raw.datatype != kDtUint8 && raw.datatype != kDtInt16 &&
      raw.datatype != kDtFloat32)
    throw Error(ErrorKind::io,
                "unsupported NIfTI dtype (uint8/int16/float32 only): " + path);

  for (int a = 0; a < 3; ++a) {
    const float pd = load_le<float>(bytes.data() + 76 + 4 * (a + 1), swap);
    raw.spacing[a] = std::abs(static_cast<double>(pd));
    if (!(raw.spacing[a] > 0.0))
      throw Error(ErrorKind::io, "non-positive NIfTI pixdim: " + path);
  }

  const auto sform_code = load_le<std::int16_t>(bytes.data() + 254, swap);
  if (sform_code > 0) {
    float srow[3][4];
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 4; ++c)
        srow[r][c] = load_le<float>(bytes.data() + 280 + 16 * r + 4 * c, swap);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) {
        if (r == c) continue;
        if (std::abs(srow[r][c]) > 1e-4f * std::max(1.0f, std::abs(srow[r][r])))
          throw Error(ErrorKind::io,
                      "unsupported NIfTI orientation (sform not diagonal): " + path);
      }
    for (int a = 0; a < 3; ++a) {
      if (srow[a][a] <= 0.0f)
        throw Error(ErrorKind::io,
                    "unsupported NIfTI orientation (negative axis): " + path);
      raw.spacing[a] = srow[a][a];
      raw.origin[a] = srow[a][3];
    }
  } else {
    for (int a = 0; a < 3; ++a)
      raw.origin[a] = load_le<float>(bytes.data() + 268 + 4 * a, swap);
  }

  const float slope = load_le<float>(bytes.data() + 112, swap);
  const float inter = load_le<float>(bytes.data() + 116, swap);
  raw.scl_slope = (slope == 0.0f) ? 1.0 : static_cast<double>(slope);
  raw.scl_inter = (slope == 0.0f) ? 0.0 : static_cast<double>(inter);

  const float vox_offset_f = load_le<float>(bytes.data() + 108, swap);
  const auto vox_offset = static_cast<std::size_t>(vox_offset_f);
  const std::size_t elem =
      raw.datatype == kDtUint8 ? 1 : (raw.datatype == kDtInt16 ? 2 : 4);
  const std::size_t nvox = static_cast<std::size_t>(raw.dims.x()) *
                           raw.dims.y() * raw.dims.z();
  if (vox_offset < kNiftiHeaderSize || bytes.size() < vox_offset + nvox * elem)
    throw Error(ErrorKind::io, "truncated NIfTI data: " + path);

  raw.data.resize(nvox * elem);
  if (!swap || elem == 1) {
    std::memcpy(raw.data.data(), bytes.data() + vox_offset, nvox * elem);
  } else {
    for (std::size_t i = 0; i < nvox; ++i)
      for (std::size_t b = 0; b < elem; ++b)
        raw.data[i * elem + b] = bytes[vox_offset + i * elem + (elem - 1 - b)];
  }
  return raw;
}

double nifti_value(const NiftiRaw& raw, std::size_t i) {
  switch (raw.datatype) {
    case kDtUint8:
      return static_cast<double>(raw.data[i]);
    case kDtInt16:
      return static_cast<double>(load_le<std::int16_t>(raw.data.data() + 2 * i, false));
    default:
      return static_cast<double>(load_le<float>(raw.data.data() + 4 * i, false));
  }
}

std::vector<unsigned char> nifti_header_bytes(const Vec3i& dims,
                                              const Vec3& spacing,
                                              const Vec3& origin,
                                              std::int16_t datatype,
                                              std::int16_t bitpix) {
  std::vector<unsigned char> h(kNiftiHeaderSize + 4, 0);
  store_le<std::int32_t>(h, 0, kNiftiHeaderSize);
  h[38] = 'r';  // regular
  store_le<std::int16_t>(h, 40, 3);
  for (int a = 0; a < 3; ++a)
    store_le<std::int16_t>(h, 40 + 2 * (a + 1), static_cast<std::int16_t>(dims[a]));
  for (int a = 4; a <= 7; ++a) store_le<std::int16_t>(h, 40 + 2 * a, 1);
  store_le<std::int16_t>(h, 70, datatype);
  store_le<std::int16_t>(h, 72, bitpix);
  store_le<float>(h, 76, 1.0f);  // qfac
  for (int a = 0; a < 3; ++a)
    store_le<float>(h, 76 + 4 * (a + 1), static_cast<float>(spacing[a]));
  store_le<float>(h, 108, 352.0f);  // vox_offset
  store_le<float>(h, 112, 1.0f);    // scl_slope
  store_le<float>(h, 116, 0.0f);    // scl_inter
  h[123] = 2;                       // xyzt_units: mm
  const char* descrip = "coseg";
  std::memcpy(h.data() + 148, descrip, std::strlen(descrip));
  store_le<std::int16_t>(h, 252, 0);  // qform_code
  store_le<std::int16_t>(h, 254, 1);  // sform_code
  for (int a = 0; a < 3; ++a) {
    store_le<float>(h, 268 + 4 * a, static_cast<float>(origin[a]));  // qoffset
    store_le<float>(h, 280 + 16 * a + 4 * a, static_cast<float>(spacing[a]));
    store_le<float>(h, 280 + 16 * a + 12, static_cast<float>(origin[a]));
  }
  std::memcpy(h.data() + 344, "n+1", 4);
  return h;
}

}  // namespace

RealVolume read_nifti_real(const std::string& path) {
  const NiftiRaw raw = read_nifti_raw(path);
  RealVolume vol(raw.dims, raw.spacing, raw.origin);
  const std::size_t n = static_cast<std::size_t>(vol.size());
  for (std::size_t i = 0; i < n; ++i)
    vol.data()[i] = nifti_value(raw, i) * raw.scl_slope + raw.scl_inter;
  return vol;
}

LabelVolume read_nifti_label(const std::string& path) {
  const NiftiRaw raw = read_nifti_raw(path);
  LabelVolume vol(raw.dims, raw.spacing, raw.origin);
  const std::size_t n = static_cast<std::size_t>(vol.size());
  if (raw.datatype == kDtUint8) {
    std::memcpy(vol.data().data(), raw.data.data(), n);
  } else {
    for (std::size_t i = 0; i < n; ++i)
      vol.data()[i] = nifti_value(raw, i) != 0.0 ? 1 : 0;
  }
  return vol;
}

void write_nifti(const RealVolume& vol, const std::string& path) {
  auto bytes = nifti_header_bytes(vol.dims(), vol.spacing(), vol.origin(),
                                  kDtFloat32, 32);
  bytes.reserve(bytes.size() + static_cast<std::size_t>(vol.size()) * 4);
  for (const double v : vol.data()) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    for (int b = 0; b < 4; ++b)
      bytes.push_back(static_cast<unsigned char>(bits >> (8 * b)));
  }
  write_file_maybe_gz(path, bytes);
}

void write_nifti(const LabelVolume& vol, const std::string& path) {
  auto bytes =
      nifti_header_bytes(vol.dims(), vol.spacing(), vol.origin(), kDtUint8, 8);
  bytes.insert(bytes.end(), vol.data().begin(), vol.data().end());
  write_file_maybe_gz(path, bytes);
}

// ---- raw + JSON sidecar --------------------------------------------------

namespace {

json volume_sidecar(const Vec3i& dims, const Vec3& spacing, const Vec3& origin,
                    const std::string& dtype) {
  json j;
  j["dims"] = {dims.x(), dims.y(), dims.z()};
  j["spacing"] = {spacing.x(), spacing.y(), spacing.z()};
  j["origin"] = {origin.x(), origin.y(), origin.z()};
  j["dtype"] = dtype;
  return j;
}

void write_sidecar(const std::string& path, const json& j) {
  std::ofstream os(path + ".json");
  if (!os) throw Error(ErrorKind::io, "cannot open for write: " + path + ".json");
  os << j.dump(2) << "\n";
}

struct Sidecar {
  Vec3i dims;
  Vec3 spacing;
  Vec3 origin;
  std::string dtype;
};

Sidecar read_sidecar(const std::string& path) {
  std::ifstream is(path + ".json");
  if (!is) throw Error(ErrorKind::io, "missing sidecar: " + path + ".json");
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::io, "bad sidecar JSON: " + std::string(e.what()));
  }
  Sidecar s;
  try {
    for (int a = 0; a < 3; ++a) {
      s.dims[a] = j.at("dims").at(a).get<int>();
      s.spacing[a] = j.at("spacing").at(a).get<double>();
      s.origin[a] = j.at("origin").at(a).get<double>();
    }
    s.dtype = j.at("dtype").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::io, "bad sidecar fields: " + std::string(e.what()));
  }
  return s;
}

std::vector<unsigned char> read_raw_payload(const std::string& path,
                                            std::size_t expected) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::io, "cannot open: " + path);
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(is)),
                                 std::istreambuf_iterator<char>());
  if (buf.size() != expected)
    throw Error(ErrorKind::io, "raw volume size does not match sidecar dims");
  return buf;
}

}  // namespace

void write_raw_json(const RealVolume& vol, const std::string& path,
                    bool as_f32) {
  write_sidecar(path, volume_sidecar(vol.dims(), vol.spacing(), vol.origin(),
                                     as_f32 ? "f32" : "f64"));
  std::vector<unsigned char> bytes;
  bytes.reserve(static_cast<std::size_t>(vol.size()) * (as_f32 ? 4 : 8));
  for (const double v : vol.data()) {
    if (as_f32) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
      for (int b = 0; b < 4; ++b)
        bytes.push_back(static_cast<unsigned char>(bits >> (8 * b)));
    } else {
      const auto bits = std::bit_cast<std::uint64_t>(v);
      for (int b = 0; b < 8; ++b)
        bytes.push_back(static_cast<unsigned char>(bits >> (8 * b)));
    }
  }
  write_file_maybe_gz(path, bytes);
}

void write_raw_json(const LabelVolume& vol, const std::string& path) {
  write_sidecar(path,
                volume_sidecar(vol.dims(), vol.spacing(), vol.origin(), "u8"));
  std::vector<unsigned char> bytes(vol.data().begin(), vol.data().end());
  write_file_maybe_gz(path, bytes);
}

RealVolume read_raw_json_real(const std::string& path) {
  const Sidecar s = read_sidecar(path);
  const std::size_t n =
      static_cast<std::size_t>(s.dims.x()) * s.dims.y() * s.dims.z();
  RealVolume vol(s.dims, s.spacing, s.origin);
  if (s.dtype == "f64") {
    const auto buf = read_raw_payload(path, n * 8);
    for (std::size_t i = 0; i < n; ++i)
      vol.data()[i] = load_le<double>(buf.data() + 8 * i, false);
  } else if (s.dtype == "f32") {
    const auto buf = read_raw_payload(path, n * 4);
    for (std::size_t i = 0; i < n; ++i)
      vol.data()[i] = load_le<float>(buf.data() + 4 * i, false);
  } else if (s.dtype == "u8") {
    const auto buf = read_raw_payload(path, n);
    for (std::size_t i = 0; i < n; ++i) vol.data()[i] = buf[i];
  } else {
    throw Error(ErrorKind::io, "unsupported raw dtype: " + s.dtype);
  }
  return vol;
}

LabelVolume read_raw_json_label(const std::string& path) {
  const Sidecar s = read_sidecar(path);
  const std::size_t n =
      static_cast<std::size_t>(s.dims.x()) * s.dims.y() * s.dims.z();
  LabelVolume vol(s.dims, s.spacing, s.origin);
  if (s.dtype == "u8") {
    const auto buf = read_raw_payload(path, n);
    std::memcpy(vol.data().data(), buf.data(), n);
  } else {
    const RealVolume real = read_raw_json_real(path);
    for (std::size_t i = 0; i < n; ++i)
      vol.data()[i] = real.data()[i] != 0.0 ? 1 : 0;
  }
  return vol;
}

RealVolume read_volume_real(const std::string& path) {
  if (ends_with(path, ".nii") || ends_with(path, ".nii.gz"))
    return read_nifti_real(path);
  return read_raw_json_real(path);
}

LabelVolume read_volume_label(const std::string& path) {
  if (ends_with(path, ".nii") || ends_with(path, ".nii.gz"))
    return read_nifti_label(path);
  return read_raw_json_label(path);
}

// ---- meshes ----------------------------------------------------------------

namespace {

struct PlyProperty {
  std::string type;
  std::string name;
  bool is_list = false;
  std::string count_type;
};

std::size_t ply_scalar_size(const std::string& t) {
  if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
  if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
  if (t == "int" || t == "uint" || t == "int32" || t == "uint32" ||
      t == "float" || t == "float32")
    return 4;
  if (t == "double" || t == "float64") return 8;
  throw Error(ErrorKind::io, "unsupported PLY type: " + t);
}

double ply_read_scalar(const unsigned char*& p, const std::string& t) {
  const std::size_t sz = ply_scalar_size(t);
  double v;
  if (t == "float" || t == "float32")
    v = load_le<float>(p, false);
  else if (t == "double" || t == "float64")
    v = load_le<double>(p, false);
  else if (sz == 1)
    v = (t == "char" || t == "int8")
            ? static_cast<double>(load_le<std::int8_t>(p, false))
            : static_cast<double>(load_le<std::uint8_t>(p, false));
  else if (sz == 2)
    v = (t == "short" || t == "int16")
            ? static_cast<double>(load_le<std::int16_t>(p, false))
            : static_cast<double>(load_le<std::uint16_t>(p, false));
  else
    v = (t == "int" || t == "int32")
            ? static_cast<double>(load_le<std::int32_t>(p, false))
            : static_cast<double>(load_le<std::uint32_t>(p, false));
  p += sz;
  return v;
}

TriMesh read_ply(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::io, "cannot open: " + path);
  std::string line;
  if (!std::getline(is, line) || line.rfind("ply", 0) != 0)
    throw Error(ErrorKind::io, "not a PLY file: " + path);

  bool binary = false;
  bool in_vertex = false, in_face = false;
  Index n_vertices = -1, n_faces = -1;
  std::vector<PlyProperty> vprops, fprops;

  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "comment" || tok == "obj_info") continue;
    if (tok == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "binary_little_endian")
        binary = true;
      else if (fmt == "ascii")
        binary = false;
      else
        throw Error(ErrorKind::io, "unsupported PLY format: " + fmt);
    } else if (tok == "element") {
      std::string name;
      Index count;
      ls >> name >> count;
      in_vertex = name == "vertex";
      in_face = name == "face";
      if (in_vertex) n_vertices = count;
      if (in_face) n_faces = count;
      if (!in_vertex && !in_face && count > 0)
        throw Error(ErrorKind::io, "unsupported PLY element: " + name);
    } else if (tok == "property") {
      PlyProperty p;
      std::string t;
      ls >> t;
      if (t == "list") {
        p.is_list = true;
        ls >> p.count_type >> p.type >> p.name;
      } else {
        p.type = t;
        ls >> p.name;
      }
      if (in_vertex) vprops.push_back(p);
      if (in_face) fprops.push_back(p);
    } else if (tok == "end_header") {
      break;
    }
  }
  if (n_vertices < 0 || n_faces < 0)
    throw Error(ErrorKind::io, "PLY missing vertex or face element: " + path);

  int xi = -1, yi = -1, zi = -1;
  for (std::size_t i = 0; i < vprops.size(); ++i) {
    if (vprops[i].is_list)
      throw Error(ErrorKind::io, "list property on PLY vertices unsupported");
    if (vprops[i].name == "x") xi = static_cast<int>(i);
    if (vprops[i].name == "y") yi = static_cast<int>(i);
    if (vprops[i].name == "z") zi = static_cast<int>(i);
  }
  if (xi < 0 || yi < 0 || zi < 0)
    throw Error(ErrorKind::io, "PLY vertices lack x/y/z: " + path);
  if (fprops.size() != 1 || !fprops[0].is_list)
    throw Error(ErrorKind::io, "PLY faces must be a single list property");

  TriMesh mesh;
  mesh.vertices.resize(n_vertices, 3);
  mesh.faces.resize(n_faces, 3);

  if (binary) {
    std::vector<unsigned char> rest((std::istreambuf_iterator<char>(is)),
                                    std::istreambuf_iterator<char>());
    const unsigned char* p = rest.data();
    const unsigned char* end = rest.data() + rest.size();
    auto need = [&](std::size_t n) {
      if (p + n > end) throw Error(ErrorKind::io, "truncated PLY data: " + path);
    };
    for (Index v = 0; v < n_vertices; ++v) {
      for (std::size_t i = 0; i < vprops.size(); ++i) {
        need(ply_scalar_size(vprops[i].type));
        const double val = ply_read_scalar(p, vprops[i].type);
        if (static_cast<int>(i) == xi) mesh.vertices(v, 0) = val;
        if (static_cast<int>(i) == yi) mesh.vertices(v, 1) = val;
        if (static_cast<int>(i) == zi) mesh.vertices(v, 2) = val;
      }
    }
    for (Index f = 0; f < n_faces; ++f) {
      need(ply_scalar_size(fprops[0].count_type));
      const auto count =
          static_cast<int>(ply_read_scalar(p, fprops[0].count_type));
      if (count != 3)
        throw Error(ErrorKind::io, "triangulation required: " + path);
      for (int e = 0; e < 3; ++e) {
        need(ply_scalar_size(fprops[0].type));
        mesh.faces(f, e) = static_cast<int>(ply_read_scalar(p, fprops[0].type));
      }
    }
  } else {
    for (Index v = 0; v < n_vertices; ++v) {
      double vals[64];
      for (std::size_t i = 0; i < vprops.size() && i < 64; ++i)
        if (!(is >> vals[i]))
          throw Error(ErrorKind::io, "truncated PLY data: " + path);
      mesh.vertices(v, 0) = vals[xi];
      mesh.vertices(v, 1) = vals[yi];
      mesh.vertices(v, 2) = vals[zi];
    }
    for (Index f = 0; f < n_faces; ++f) {
      int count;
      if (!(is >> count)) throw Error(ErrorKind::io, "truncated PLY data");
      if (count != 3)
        throw Error(ErrorKind::io, "triangulation required: " + path);
      for (int e = 0; e < 3; ++e)
        if (!(is >> mesh.faces(f, e)))
          throw Error(ErrorKind::io, "truncated PLY data");
    }
  }
  return mesh;
}

TriMesh read_obj(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::io, "cannot open: " + path);
  std::vector<Vec3> verts;
  std::vector<std::array<int, 3>> faces;
  std::string line;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "v") {
      Vec3 p;
      if (!(ls >> p.x() >> p.y() >> p.z()))
        throw Error(ErrorKind::io, "bad OBJ vertex line");
      verts.push_back(p);
    } else if (tok == "f") {
      std::vector<int> idx;
      std::string ref;
      while (ls >> ref) {
        // "i", "i/t", "i/t/n", "i//n" all start with the vertex index
        idx.push_back(std::stoi(ref));
      }
      if (idx.size() != 3)
        throw Error(ErrorKind::io, "triangulation required: " + path);
      std::array<int, 3> f;
      for (int e = 0; e < 3; ++e) {
        int i = idx[static_cast<std::size_t>(e)];
        if (i < 0) i = static_cast<int>(verts.size()) + i + 1;
        f[static_cast<std::size_t>(e)] = i - 1;  // OBJ is 1-based
      }
      faces.push_back(f);
    }
  }
  if (verts.empty()) throw Error(ErrorKind::io, "OBJ has no vertices: " + path);
  TriMesh mesh;
  mesh.vertices.resize(static_cast<Index>(verts.size()), 3);
  for (Index v = 0; v < mesh.vertices.rows(); ++v)
    mesh.vertices.row(v) = verts[static_cast<std::size_t>(v)].transpose();
  mesh.faces.resize(static_cast<Index>(faces.size()), 3);
  for (Index f = 0; f < mesh.faces.rows(); ++f)
    for (int e = 0; e < 3; ++e)
      mesh.faces(f, e) =
          faces[static_cast<std::size_t>(f)][static_cast<std::size_t>(e)];
  return mesh;
}

}  // namespace

TriMesh read_mesh(const std::string& path) {
  if (ends_with(path, ".obj")) return read_obj(path);
  if (ends_with(path, ".ply")) return read_ply(path);
  throw Error(ErrorKind::io, "unsupported mesh format: " + path);
}

void write_mesh(const TriMesh& mesh, const std::string& path, MeshFormat format,
                bool float64) {
  if (ends_with(path, ".obj")) format = MeshFormat::obj;

  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::io, "cannot open for write: " + path);

  if (format == MeshFormat::obj) {
    os << "# coseg mesh\n";
    char buf[128];
    for (Index v = 0; v < mesh.num_vertices(); ++v) {
      std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g\n",
                    mesh.vertices(v, 0), mesh.vertices(v, 1),
                    mesh.vertices(v, 2));
      os << buf;
    }
    for (Index f = 0; f < mesh.num_faces(); ++f)
      os << "f " << mesh.faces(f, 0) + 1 << ' ' << mesh.faces(f, 1) + 1 << ' '
         << mesh.faces(f, 2) + 1 << '\n';
    if (!os) throw Error(ErrorKind::io, "write failed: " + path);
    return;
  }

  const bool binary = format == MeshFormat::ply_binary;
  const char* scalar = float64 ? "double" : "float";
  os << "ply\nformat " << (binary ? "binary_little_endian" : "ascii")
     << " 1.0\n";
  os << "element vertex " << mesh.num_vertices() << "\n";
  os << "property " << scalar << " x\nproperty " << scalar << " y\nproperty "
     << scalar << " z\n";
  os << "element face " << mesh.num_faces() << "\n";
  os << "property list uchar int vertex_indices\n";
  os << "end_header\n";

  if (binary) {
    for (Index v = 0; v < mesh.num_vertices(); ++v)
      for (int c = 0; c < 3; ++c) {
        if (float64) {
          const double d = mesh.vertices(v, c);
          os.write(reinterpret_cast<const char*>(&d), 8);
        } else {
          const float f = static_cast<float>(mesh.vertices(v, c));
          os.write(reinterpret_cast<const char*>(&f), 4);
        }
      }
    for (Index f = 0; f < mesh.num_faces(); ++f) {
      const unsigned char count = 3;
      os.write(reinterpret_cast<const char*>(&count), 1);
      for (int e = 0; e < 3; ++e) {
        const std::int32_t idx = mesh.faces(f, e);
        os.write(reinterpret_cast<const char*>(&idx), 4);
      }
    }
  } else {
    char buf[160];
    for (Index v = 0; v < mesh.num_vertices(); ++v) {
      if (float64)
        std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n",
                      mesh.vertices(v, 0), mesh.vertices(v, 1),
                      mesh.vertices(v, 2));
      else
        std::snprintf(buf, sizeof buf, "%.9g %.9g %.9g\n",
                      static_cast<double>(static_cast<float>(mesh.vertices(v, 0))),
                      static_cast<double>(static_cast<float>(mesh.vertices(v, 1))),
                      static_cast<double>(static_cast<float>(mesh.vertices(v, 2))));
      os << buf;
    }
    for (Index f = 0; f < mesh.num_faces(); ++f)
      os << "3 " << mesh.faces(f, 0) << ' ' << mesh.faces(f, 1) << ' '
         << mesh.faces(f, 2) << '\n';
  }
  if (!os) throw Error(ErrorKind::io, "write failed: " + path);
}

}  // namespace coseg
