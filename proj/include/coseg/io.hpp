#pragma once

#include "coseg/mesh.hpp"
#include "coseg/types.hpp"
#include "coseg/volume.hpp"

#include <string>

namespace coseg {

/// NIfTI-1 single-file volumes (.nii, .nii.gz). Supported dtypes: uint8,
/// int16, float32; spacing comes from pixdim, the origin from the sform
/// translation when sform_code > 0 (the scale/rotation part must be diagonal
/// and match pixdim) and from qoffset otherwise. Values are widened to
/// double.
RealVolume read_nifti_real(const std::string& path);

/// Same file handling, but for binary labels: uint8 is taken as-is, other
/// supported dtypes binarize as value != 0.
LabelVolume read_nifti_label(const std::string& path);

/// Writes float32 (real) with sform set; gzip when the path ends in ".gz".
void write_nifti(const RealVolume& vol, const std::string& path);
/// Writes uint8 (label).
void write_nifti(const LabelVolume& vol, const std::string& path);

/// Raw little-endian array with a JSON sidecar at path + ".json" holding
/// {dims, spacing, origin, dtype}; dtype is "u8", "f32" or "f64".
void write_raw_json(const RealVolume& vol, const std::string& path,
                    bool as_f32 = false);
void write_raw_json(const LabelVolume& vol, const std::string& path);
RealVolume read_raw_json_real(const std::string& path);
LabelVolume read_raw_json_label(const std::string& path);

/// Reads .nii/.nii.gz or raw+JSON by extension.
RealVolume read_volume_real(const std::string& path);
LabelVolume read_volume_label(const std::string& path);

enum class MeshFormat { ply_binary, ply_ascii, obj };

/// PLY (binary little-endian or ascii) and OBJ, triangles only. PLY vertex
/// positions are float32 by default; pass float64 = true for the double
/// extension. The format is picked from the extension on read; on write,
/// .obj selects OBJ and .ply the requested PLY flavor.
TriMesh read_mesh(const std::string& path);
void write_mesh(const TriMesh& mesh, const std::string& path,
                MeshFormat format = MeshFormat::ply_binary,
                bool float64 = false);

}  // namespace coseg
