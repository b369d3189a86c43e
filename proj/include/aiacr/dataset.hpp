#pragma once

// Slice datasets on disk and the synthetic generator.
//
// A dataset directory holds images/<id>.png (16-bit), masks/<id>_<organ>.png
// (8-bit) and manifest.jsonl with one line per (slice, organ):
//   {"v":1,"id":...,"organ":...,"split":"train|validation|test",
//    "image":"images/...","mask":"masks/...","spacing":[row_mm,col_mm],
//    "volume":...,"slice":k,"offset":[row,col]}

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "aiacr/volume.hpp"

namespace aiacr {

struct ManifestEntry {
    std::string id;
    std::string organ;
    std::string split;
    std::filesystem::path image;  ///< relative to the manifest directory
    std::filesystem::path mask;
    PixelSpacing spacing;
    SliceProvenance provenance;
};

struct DatasetManifest {
    std::filesystem::path root;
    std::vector<ManifestEntry> entries;

    /// Sorted organ vocabulary.
    std::vector<std::string> organs() const;
    std::vector<std::size_t> split_indices(const std::string& split) const;
};

inline const char* kManifestName = "manifest.jsonl";

/// Writes the slices under `root` and appends them to root/manifest.jsonl.
DatasetManifest write_dataset(const std::filesystem::path& root, const std::vector<SliceRecord>& slices,
                              const std::vector<std::string>& splits);

void save_manifest(const DatasetManifest& manifest);
/// Accepts the manifest file or its directory.
DatasetManifest load_manifest(const std::filesystem::path& path);
SliceRecord load_slice(const DatasetManifest& manifest, const ManifestEntry& entry);

struct SynthParams {
    int size = kCropSize;
    int min_area = 900;
    int max_area = 5000;
    int distractors = 3;
    double contrast = 0.12;  ///< object intensity offset from the background
    double noise = 0.05;     ///< per-pixel Gaussian noise
    double spacing_mm = 1.0;
};

/// Deterministic in (seed, index). The target is a star-shaped blob; the
/// distractors look alike but never touch it.
SliceRecord synth_slice(const SynthParams& params, std::uint64_t seed, int index);

/// 80 / 10 / 10 train / validation / test by index modulo 10.
std::string synth_split(int index);

DatasetManifest synth_dataset(int n, std::uint64_t seed, const std::filesystem::path& root,
                              const SynthParams& params = {});

}  // namespace aiacr
