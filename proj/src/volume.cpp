#include "aiacr/volume.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>

namespace aiacr {

namespace {

namespace fs = std::filesystem;

constexpr int kHeaderSize = 348;

enum NiftiType : std::int16_t {
    kUint8 = 2,
    kInt16 = 4,
    kInt32 = 8,
    kFloat32 = 16,
    kFloat64 = 64,
    kInt8 = 256,
    kUint16 = 512,
    kUint32 = 768,
};

struct GzCloser {
    void operator()(gzFile f) const { gzclose(f); }
};
using GzFile = std::unique_ptr<std::remove_pointer_t<gzFile>, GzCloser>;

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

template <class T>
T load(const unsigned char* p, bool swap) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, p, sizeof(T));
    if (swap) std::reverse(b, b + sizeof(T));
    T v;
    std::memcpy(&v, b, sizeof(T));
    return v;
}

template <class T>
void store(unsigned char* p, T v) {
    std::memcpy(p, &v, sizeof(T));
}

int type_size(std::int16_t type) {
    switch (type) {
        case kUint8:
        case kInt8: return 1;
        case kInt16:
        case kUint16: return 2;
        case kInt32:
        case kUint32:
        case kFloat32: return 4;
        case kFloat64: return 8;
        default: return 0;
    }
}

double sample(const unsigned char* p, std::int16_t type, bool swap) {
    switch (type) {
        case kUint8: return *p;
        case kInt8: return static_cast<std::int8_t>(*p);
        case kInt16: return load<std::int16_t>(p, swap);
        case kUint16: return load<std::uint16_t>(p, swap);
        case kInt32: return load<std::int32_t>(p, swap);
        case kUint32: return load<std::uint32_t>(p, swap);
        case kFloat32: return load<float>(p, swap);
        default: return load<double>(p, swap);
    }
}

template <class T>
void write_volume(const fs::path& path, const Volume<T>& v, const VolumeSpacing& spacing, std::int16_t type) {
    unsigned char header[kHeaderSize + 4] = {};
    store<std::int32_t>(header, kHeaderSize);
    const std::int16_t dims[8] = {3, static_cast<std::int16_t>(v.shape.width), static_cast<std::int16_t>(v.shape.height),
                                  static_cast<std::int16_t>(v.slices), 1, 1, 1, 1};
    std::memcpy(header + 40, dims, sizeof dims);
    store<std::int16_t>(header + 70, type);
    store<std::int16_t>(header + 72, static_cast<std::int16_t>(type == kInt16 ? 16 : 8));
    const float pixdim[8] = {1.0f, static_cast<float>(spacing.col_mm), static_cast<float>(spacing.row_mm),
                             static_cast<float>(spacing.slice_mm), 0, 0, 0, 0};
    std::memcpy(header + 76, pixdim, sizeof pixdim);
    store<float>(header + 108, static_cast<float>(kHeaderSize + 4));
    store<float>(header + 112, 1.0f);
    header[123] = 10;  // xyzt_units: mm, seconds
    std::memcpy(header + 344, "n+1", 4);

    const bool gz = ends_with(path.string(), ".gz");
    GzFile f(gzopen(path.c_str(), gz ? "wb6" : "wbT"));
    if (!f) fail(ErrorCode::IoError, "cannot open " + path.string());
    std::vector<unsigned char> body;
    body.reserve(v.data.size() * 2);
    for (T x : v.data) {
        if constexpr (sizeof(T) == 1) {
            body.push_back(static_cast<unsigned char>(x));
        } else {
            const auto s = static_cast<std::int16_t>(std::clamp<std::int32_t>(x, INT16_MIN, INT16_MAX));
            unsigned char b[2];
            std::memcpy(b, &s, 2);
            body.insert(body.end(), b, b + 2);
        }
    }
    if (gzwrite(f.get(), header, sizeof header) != static_cast<int>(sizeof header) ||
        gzwrite(f.get(), body.data(), static_cast<unsigned>(body.size())) != static_cast<int>(body.size())) {
        fail(ErrorCode::IoError, "write failed: " + path.string());
    }
}

fs::path find_nifti(const fs::path& dir, const std::string& stem) {
    for (const char* ext : {".nii.gz", ".nii"}) {
        const fs::path p = dir / (stem + ext);
        if (fs::exists(p)) return p;
    }
    return {};
}

std::string nifti_stem(const fs::path& p) {
    std::string name = p.filename().string();
    for (const char* ext : {".nii.gz", ".nii"}) {
        if (ends_with(name, ext)) return name.substr(0, name.size() - std::strlen(ext));
    }
    return {};
}

}  // namespace

NiftiImage read_nifti(const fs::path& path) {
    const std::string name = path.filename().string();
    if (!ends_with(name, ".nii") && !ends_with(name, ".nii.gz")) {
        fail(ErrorCode::UnsupportedFormat, "expected a .nii or .nii.gz file: " + path.string());
    }
    GzFile f(gzopen(path.c_str(), "rb"));
    if (!f) fail(ErrorCode::IoError, "cannot open " + path.string());
    unsigned char h[kHeaderSize];
    if (gzread(f.get(), h, kHeaderSize) != kHeaderSize) fail(ErrorCode::CorruptHeader, "truncated header: " + name);

    bool swap = false;
    if (load<std::int32_t>(h, false) != kHeaderSize) {
        if (load<std::int32_t>(h, true) != kHeaderSize) fail(ErrorCode::CorruptHeader, "bad sizeof_hdr: " + name);
        swap = true;
    }
    if (std::memcmp(h + 344, "n+1", 4) != 0) {
        if (std::memcmp(h + 344, "ni1", 4) == 0) {
            fail(ErrorCode::UnsupportedFormat, "two-file NIfTI (.hdr/.img) is not supported: " + name);
        }
        fail(ErrorCode::UnsupportedFormat, "missing NIfTI-1 magic: " + name);
    }
    std::int16_t dim[8];
    for (int i = 0; i < 8; ++i) dim[i] = load<std::int16_t>(h + 40 + 2 * i, swap);
    if (dim[0] < 2 || dim[0] > 7) fail(ErrorCode::CorruptHeader, "bad dimension count: " + name);
    for (int i = 4; i <= dim[0]; ++i) {
        if (dim[i] != 1) fail(ErrorCode::UnsupportedFormat, "only 2D/3D volumes are supported: " + name);
    }
    const int nx = dim[1];
    const int ny = dim[2];
    const int nz = dim[0] >= 3 ? dim[3] : 1;
    if (nx <= 0 || ny <= 0 || nz <= 0) fail(ErrorCode::CorruptHeader, "non-positive dimension: " + name);

    const auto type = load<std::int16_t>(h + 70, swap);
    const int bytes = type_size(type);
    if (bytes == 0) fail(ErrorCode::UnsupportedFormat, "unsupported NIfTI datatype " + std::to_string(type));
    float pixdim[8];
    for (int i = 0; i < 8; ++i) pixdim[i] = load<float>(h + 76 + 4 * i, swap);
    const float vox_offset = load<float>(h + 108, swap);
    float slope = load<float>(h + 112, swap);
    const float inter = load<float>(h + 116, swap);
    if (slope == 0.0f || !std::isfinite(slope)) slope = 1.0f;
    if (!(vox_offset >= kHeaderSize)) fail(ErrorCode::CorruptHeader, "bad vox_offset: " + name);

    NiftiImage out;
    const double sz = dim[0] >= 3 ? pixdim[3] : 1.0;
    if (!(pixdim[1] > 0 && pixdim[2] > 0 && sz > 0)) fail(ErrorCode::CorruptHeader, "non-positive spacing: " + name);
    out.spacing = {pixdim[2], pixdim[1], sz};

    const long skip = static_cast<long>(vox_offset) - kHeaderSize;
    std::vector<unsigned char> pad(static_cast<std::size_t>(skip));
    if (skip > 0 && gzread(f.get(), pad.data(), static_cast<unsigned>(skip)) != skip) {
        fail(ErrorCode::CorruptHeader, "truncated extension block: " + name);
    }
    const std::size_t count = static_cast<std::size_t>(nx) * ny * nz;
    std::vector<unsigned char> raw(count * bytes);
    if (gzread(f.get(), raw.data(), static_cast<unsigned>(raw.size())) != static_cast<int>(raw.size())) {
        fail(ErrorCode::CorruptHeader, "voxel data shorter than the header declares: " + name);
    }
    out.values = Volume<double>(nz, {ny, nx});
    for (std::size_t i = 0; i < count; ++i) out.values.data[i] = sample(raw.data() + i * bytes, type, swap) * slope + inter;
    return out;
}

void write_nifti(const fs::path& path, const Volume<std::int32_t>& voxels, const VolumeSpacing& spacing) {
    write_volume(path, voxels, spacing, kInt16);
}

void write_nifti(const fs::path& path, const Volume<std::uint8_t>& mask, const VolumeSpacing& spacing) {
    write_volume(path, mask, spacing, kUint8);
}

VolumeRecord ingest_volume(const fs::path& directory) {
    if (!fs::is_directory(directory)) fail(ErrorCode::IoError, "not a directory: " + directory.string());
    const fs::path image_path = find_nifti(directory, "image");
    if (image_path.empty()) fail(ErrorCode::UnsupportedFormat, "no image.nii or image.nii.gz in " + directory.string());

    VolumeRecord rec;
    rec.id = directory.filename().string();
    if (rec.id.empty()) rec.id = directory.parent_path().filename().string();
    const NiftiImage image = read_nifti(image_path);
    rec.spacing = image.spacing;
    rec.voxels = Volume<std::int32_t>(image.values.slices, image.values.shape);
    for (std::size_t i = 0; i < image.values.data.size(); ++i) {
        rec.voxels.data[i] = static_cast<std::int32_t>(std::lround(image.values.data[i]));
    }

    const fs::path mask_dir = directory / "masks";
    if (fs::is_directory(mask_dir)) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(mask_dir)) {
            if (e.is_regular_file() && !nifti_stem(e.path()).empty()) files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& p : files) {
            const NiftiImage m = read_nifti(p);
            if (m.values.slices != rec.voxels.slices || !(m.values.shape == rec.voxels.shape)) {
                fail(ErrorCode::ShapeMismatch, "mask " + p.filename().string() + " does not match the image shape");
            }
            Volume<std::uint8_t> mask(m.values.slices, m.values.shape);
            for (std::size_t i = 0; i < mask.data.size(); ++i) mask.data[i] = m.values.data[i] > 0.5 ? 1 : 0;
            rec.organ_masks.emplace(nifti_stem(p), std::move(mask));
        }
    }
    return rec;
}

double normalize_hu(double hu) { return (std::clamp(hu, -1000.0, 1000.0) + 1000.0) / 2000.0; }

Point crop_origin(const Volume<std::int32_t>& voxels, int slice) {
    const Shape s = voxels.shape;
    double sum_r = 0.0;
    double sum_c = 0.0;
    std::size_t n = 0;
    for (int r = 0; r < s.height; ++r) {
        for (int c = 0; c < s.width; ++c) {
            if (voxels(slice, r, c) > kBodyThresholdHu) {
                sum_r += r;
                sum_c += c;
                ++n;
            }
        }
    }
    const double cr = n ? sum_r / n : (s.height - 1) / 2.0;
    const double cc = n ? sum_c / n : (s.width - 1) / 2.0;
    const int half = kCropSize / 2;
    return {std::clamp(static_cast<int>(std::lround(cr)) - half, 0, s.height - kCropSize),
            std::clamp(static_cast<int>(std::lround(cc)) - half, 0, s.width - kCropSize)};
}

std::vector<SliceRecord> crop_axial(const VolumeRecord& volume) {
    const Shape s = volume.voxels.shape;
    if (s.height < kCropSize || s.width < kCropSize) {
        fail(ErrorCode::TooSmall, "in-plane size " + std::to_string(s.height) + "x" + std::to_string(s.width) +
                                      " is below " + std::to_string(kCropSize));
    }
    std::vector<SliceRecord> out;
    const PixelSpacing spacing(volume.spacing.row_mm, volume.spacing.col_mm);
    for (int z = 0; z < volume.voxels.slices; ++z) {
        const Point o = crop_origin(volume.voxels, z);
        Grid<double> image;
        for (const auto& [organ, mask] : volume.organ_masks) {
            BinaryMask crop({kCropSize, kCropSize});
            for (int r = 0; r < kCropSize; ++r) {
                for (int c = 0; c < kCropSize; ++c) crop.set(r, c, mask(z, o.row + r, o.col + c) != 0);
            }
            if (crop.empty()) continue;
            if (image.size() == 0) {
                image = Grid<double>({kCropSize, kCropSize});
                for (int r = 0; r < kCropSize; ++r) {
                    for (int c = 0; c < kCropSize; ++c) image(r, c) = normalize_hu(volume.voxels(z, o.row + r, o.col + c));
                }
            }
            SliceRecord rec;
            rec.id = volume.id + "_" + std::to_string(z);
            rec.organ = organ;
            rec.image = image;
            rec.gt_mask = std::move(crop);
            rec.spacing = spacing;
            rec.provenance = {volume.id, z, o.row, o.col};
            out.push_back(std::move(rec));
        }
    }
    return out;
}

}  // namespace aiacr
