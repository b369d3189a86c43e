#include "aiacr/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

#include <json.hpp>

#include "aiacr/click.hpp"
#include "aiacr/image_io.hpp"

namespace aiacr {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<std::string> DatasetManifest::organs() const {
    std::set<std::string> s;
    for (const auto& e : entries) s.insert(e.organ);
    return {s.begin(), s.end()};
}

std::vector<std::size_t> DatasetManifest::split_indices(const std::string& split) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (entries[i].split == split) out.push_back(i);
    }
    return out;
}

namespace {

json entry_json(const ManifestEntry& e) {
    return {{"v", 1},
            {"id", e.id},
            {"organ", e.organ},
            {"split", e.split},
            {"image", e.image.generic_string()},
            {"mask", e.mask.generic_string()},
            {"spacing", {e.spacing.row_mm, e.spacing.col_mm}},
            {"volume", e.provenance.volume_id},
            {"slice", e.provenance.slice_index},
            {"offset", {e.provenance.row_offset, e.provenance.col_offset}}};
}

ManifestEntry entry_from_json(const json& j) {
    if (!j.is_object() || !j.contains("v")) fail(ErrorCode::CorruptHeader, "manifest line without a version");
    if (j.at("v") != 1) fail(ErrorCode::UnsupportedFormat, "unsupported manifest version " + j.at("v").dump());
    try {
        ManifestEntry e;
        e.id = j.at("id").get<std::string>();
        e.organ = j.at("organ").get<std::string>();
        e.split = j.at("split").get<std::string>();
        e.image = j.at("image").get<std::string>();
        e.mask = j.at("mask").get<std::string>();
        e.spacing = PixelSpacing(j.at("spacing").at(0).get<double>(), j.at("spacing").at(1).get<double>());
        e.provenance = {j.at("volume").get<std::string>(), j.at("slice").get<int>(), j.at("offset").at(0).get<int>(),
                        j.at("offset").at(1).get<int>()};
        return e;
    } catch (const json::exception& ex) {
        fail(ErrorCode::CorruptHeader, std::string("malformed manifest line: ") + ex.what());
    }
}

}  // namespace

DatasetManifest write_dataset(const fs::path& root, const std::vector<SliceRecord>& slices,
                              const std::vector<std::string>& splits) {
    if (splits.size() != slices.size()) fail(ErrorCode::InvalidArgument, "one split tag per slice is required");
    fs::create_directories(root / "images");
    fs::create_directories(root / "masks");
    DatasetManifest manifest;
    manifest.root = root;
    if (fs::exists(root / kManifestName)) manifest = load_manifest(root);
    std::set<std::string> written;
    for (std::size_t i = 0; i < slices.size(); ++i) {
        const SliceRecord& s = slices[i];
        if (s.gt_mask.empty()) fail(ErrorCode::EmptyGroundTruth, "slice " + s.id + " has an empty mask");
        ManifestEntry e;
        e.id = s.id;
        e.organ = s.organ;
        e.split = splits[i];
        e.image = fs::path("images") / (s.id + ".png");
        e.mask = fs::path("masks") / (s.id + "_" + s.organ + ".png");
        e.spacing = s.spacing;
        e.provenance = s.provenance;
        if (written.insert(s.id).second) write_image_png(root / e.image, s.image);
        write_mask_png(root / e.mask, s.gt_mask);
        manifest.entries.push_back(std::move(e));
    }
    save_manifest(manifest);
    return manifest;
}

void save_manifest(const DatasetManifest& manifest) {
    const fs::path path = manifest.root / kManifestName;
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) fail(ErrorCode::IoError, "cannot write " + tmp.string());
        for (const auto& e : manifest.entries) out << entry_json(e).dump() << '\n';
        if (!out) fail(ErrorCode::IoError, "write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

DatasetManifest load_manifest(const fs::path& path) {
    const fs::path file = fs::is_directory(path) ? path / kManifestName : path;
    std::ifstream in(file);
    if (!in) fail(ErrorCode::IoError, "cannot open manifest " + file.string());
    DatasetManifest m;
    m.root = file.parent_path();
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& ex) {
            fail(ErrorCode::CorruptHeader, std::string("manifest is not valid JSON lines: ") + ex.what());
        }
        m.entries.push_back(entry_from_json(j));
    }
    return m;
}

SliceRecord load_slice(const DatasetManifest& manifest, const ManifestEntry& entry) {
    SliceRecord s;
    s.id = entry.id;
    s.organ = entry.organ;
    s.image = read_image_png(manifest.root / entry.image);
    s.gt_mask = read_mask_png(manifest.root / entry.mask);
    if (!(s.image.shape() == s.gt_mask.shape())) fail(ErrorCode::ShapeMismatch, "image and mask differ for " + entry.id);
    if (s.gt_mask.empty()) fail(ErrorCode::EmptyGroundTruth, "empty mask for " + entry.id + "/" + entry.organ);
    s.spacing = entry.spacing;
    s.provenance = entry.provenance;
    return s;
}

namespace {

struct Blob {
    double row = 0.0;
    double col = 0.0;
    double radius = 0.0;
    double amp[3] = {};
    double phase[3] = {};

    double boundary(double theta) const {
        double f = 1.0;
        for (int k = 0; k < 3; ++k) f += amp[k] * std::cos((k + 2) * theta + phase[k]);
        return radius * f;
    }
    bool contains(double r, double c) const {
        const double dr = r - row;
        const double dc = c - col;
        return std::hypot(dr, dc) <= boundary(std::atan2(dr, dc));
    }
};

Blob random_blob(Rng& rng, int size, double radius) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Blob b;
    b.radius = radius;
    for (int k = 0; k < 3; ++k) {
        b.amp[k] = 0.12 * u(rng);
        b.phase[k] = 2.0 * std::numbers::pi * u(rng);
    }
    const double margin = 1.4 * radius + 6.0;
    b.row = margin + (size - 2.0 * margin) * u(rng);
    b.col = margin + (size - 2.0 * margin) * u(rng);
    return b;
}

BinaryMask rasterize(const Blob& b, int size) {
    BinaryMask m({size, size});
    const int r0 = std::max(0, static_cast<int>(b.row - 1.5 * b.radius) - 1);
    const int r1 = std::min(size - 1, static_cast<int>(b.row + 1.5 * b.radius) + 1);
    const int c0 = std::max(0, static_cast<int>(b.col - 1.5 * b.radius) - 1);
    const int c1 = std::min(size - 1, static_cast<int>(b.col + 1.5 * b.radius) + 1);
    for (int r = r0; r <= r1; ++r) {
        for (int c = c0; c <= c1; ++c) m.set(r, c, b.contains(r, c));
    }
    return m;
}

}  // namespace

SliceRecord synth_slice(const SynthParams& params, std::uint64_t seed, int index) {
    if (params.size < 32 || params.min_area < 1 || params.max_area < params.min_area) {
        fail(ErrorCode::InvalidArgument, "invalid synthetic dataset parameters");
    }
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(index));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int n = params.size;
    const double two_pi = 2.0 * std::numbers::pi;

    BinaryMask target;
    for (int attempt = 0;; ++attempt) {
        if (attempt == 1000) fail(ErrorCode::InvalidArgument, "area bounds cannot be met at this image size");
        const double area = params.min_area + (params.max_area - params.min_area) * u(rng);
        target = rasterize(random_blob(rng, n, std::sqrt(area / std::numbers::pi)), n);
        const auto count = static_cast<int>(target.count());
        if (count >= params.min_area && count <= params.max_area && is_simply_connected(target)) break;
    }

    Grid<double> image({n, n});
    double amp[3];
    double fr[3];
    double fc[3];
    double ph[3];
    for (int k = 0; k < 3; ++k) {
        amp[k] = 0.02 + 0.04 * u(rng);
        fr[k] = 0.5 + 2.5 * u(rng);
        fc[k] = 0.5 + 2.5 * u(rng);
        ph[k] = two_pi * u(rng);
    }
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            double v = 0.5;
            for (int k = 0; k < 3; ++k) v += amp[k] * std::sin(two_pi * (fr[k] * r + fc[k] * c) / n + ph[k]);
            image(r, c) = v;
        }
    }

    auto paint = [&](const BinaryMask& m, double offset) {
        for (int r = 0; r < n; ++r) {
            for (int c = 0; c < n; ++c) {
                if (m(r, c)) image(r, c) += offset;
            }
        }
    };
    auto offset = [&] { return (u(rng) < 0.5 ? -1.0 : 1.0) * params.contrast * (0.8 + 0.4 * u(rng)); };
    paint(target, offset());

    BinaryMask occupied = dilate(target, 6);
    for (int d = 0; d < params.distractors; ++d) {
        for (int attempt = 0; attempt < 20; ++attempt) {
            const double area = params.min_area + (params.max_area - params.min_area) * u(rng);
            const BinaryMask m = rasterize(random_blob(rng, n, std::sqrt(area / std::numbers::pi)), n);
            bool clear = true;
            for (std::size_t i = 0; i < m.cells().size() && clear; ++i) {
                clear = !(m.cells().values()[i] && occupied.cells().values()[i]);
            }
            if (!clear) continue;
            paint(m, offset());
            const BinaryMask grown = dilate(m, 6);
            for (int r = 0; r < n; ++r) {
                for (int c = 0; c < n; ++c) {
                    if (grown(r, c)) occupied.set(r, c, true);
                }
            }
            break;
        }
    }

    std::normal_distribution<double> noise(0.0, params.noise);
    for (double& v : image.values()) v = quantize16(v + noise(rng));

    char id[32];
    std::snprintf(id, sizeof id, "synth_%05d", index);
    SliceRecord s;
    s.id = id;
    s.organ = "blob";
    s.image = std::move(image);
    s.gt_mask = std::move(target);
    s.spacing = PixelSpacing(params.spacing_mm, params.spacing_mm);
    s.provenance = {"synth", index, 0, 0};
    return s;
}

std::string synth_split(int index) {
    const int k = index % 10;
    return k < 8 ? "train" : (k == 8 ? "validation" : "test");
}

DatasetManifest synth_dataset(int n, std::uint64_t seed, const fs::path& root, const SynthParams& params) {
    if (n < 1) fail(ErrorCode::InvalidArgument, "synthetic dataset size must be positive");
    if (fs::exists(root / kManifestName)) fs::remove(root / kManifestName);
    DatasetManifest manifest;
    // Written in chunks so a large dataset never sits in memory at once.
    constexpr int kChunk = 64;
    for (int start = 0; start < n; start += kChunk) {
        std::vector<SliceRecord> slices;
        std::vector<std::string> splits;
        for (int i = start; i < std::min(n, start + kChunk); ++i) {
            slices.push_back(synth_slice(params, seed, i));
            splits.push_back(synth_split(i));
        }
        manifest = write_dataset(root, slices, splits);
    }
    return manifest;
}

}  // namespace aiacr
