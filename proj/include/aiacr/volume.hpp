#pragma once

// CT volumes: NIfTI-1 input/output, ingestion and 256x256 axial cropping.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "aiacr/geometry.hpp"

namespace aiacr {

/// slices x height x width, row-major within a slice.
template <class T>
struct Volume {
    int slices = 0;
    Shape shape;
    std::vector<T> data;

    Volume() = default;
    Volume(int s, Shape sh, T fill = T{}) : slices(s), shape(sh), data(static_cast<std::size_t>(s) * sh.area(), fill) {}

    T& operator()(int z, int r, int c) { return data[index(z, r, c)]; }
    const T& operator()(int z, int r, int c) const { return data[index(z, r, c)]; }
    std::size_t index(int z, int r, int c) const {
        return (static_cast<std::size_t>(z) * shape.height + r) * shape.width + c;
    }
    bool same_shape(const Volume& o) const { return slices == o.slices && shape == o.shape; }
    bool operator==(const Volume&) const = default;
};

struct VolumeSpacing {
    double row_mm = 1.0;
    double col_mm = 1.0;
    double slice_mm = 1.0;
    bool operator==(const VolumeSpacing&) const = default;
};

struct VolumeRecord {
    std::string id;
    Volume<std::int32_t> voxels;  ///< Hounsfield units
    VolumeSpacing spacing;
    std::map<std::string, Volume<std::uint8_t>> organ_masks;  ///< binary, same shape as voxels

    bool operator==(const VolumeRecord&) const = default;
};

/// Raw NIfTI-1 content with the scaling (scl_slope / scl_inter) applied.
struct NiftiImage {
    Volume<double> values;
    VolumeSpacing spacing;
};

/// Reads single-file NIfTI-1 (.nii or gzip-compressed .nii.gz). NIfTI's
/// first axis becomes the column index, the second the row index.
NiftiImage read_nifti(const std::filesystem::path& path);

/// Writes int16 voxels; gzip-compressed when the name ends in ".gz".
void write_nifti(const std::filesystem::path& path, const Volume<std::int32_t>& voxels, const VolumeSpacing& spacing);
void write_nifti(const std::filesystem::path& path, const Volume<std::uint8_t>& mask, const VolumeSpacing& spacing);

/// Directory layout: image.nii[.gz] plus masks/<organ>.nii[.gz].
VolumeRecord ingest_volume(const std::filesystem::path& directory);

struct SliceProvenance {
    std::string volume_id;
    int slice_index = 0;
    int row_offset = 0;  ///< crop origin in the source slice
    int col_offset = 0;
    bool operator==(const SliceProvenance&) const = default;
};

/// One organ on one axial slice.
struct SliceRecord {
    std::string id;
    std::string organ;
    Grid<double> image;  ///< normalised to [0, 1]
    BinaryMask gt_mask;
    PixelSpacing spacing;
    SliceProvenance provenance;
};

constexpr int kCropSize = 256;
constexpr double kBodyThresholdHu = -300.0;

/// HU clipped to [-1000, 1000] and mapped linearly onto [0, 1].
double normalize_hu(double hu);

/// Top-left corner of the crop window on one slice: body centre of mass
/// (pixels above -300 HU) minus half the window, clamped to the slice.
/// Slices without body pixels are centred.
Point crop_origin(const Volume<std::int32_t>& voxels, int slice);

/// One record per (slice, organ) whose cropped mask is nonempty.
std::vector<SliceRecord> crop_axial(const VolumeRecord& volume);

}  // namespace aiacr
