#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "aiacr/dataset.hpp"
#include "aiacr/image_io.hpp"
#include "oracles.hpp"

using namespace aiacr;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "aiacr_dataio" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// Air everywhere, a soft-tissue disc as the body and a box-shaped organ.
Volume<std::int32_t> phantom(int slices, Shape shape, Point body_centre, int body_radius) {
    Volume<std::int32_t> v(slices, shape, -1000);
    for (int z = 0; z < slices; ++z) {
        for (int r = 0; r < shape.height; ++r) {
            for (int c = 0; c < shape.width; ++c) {
                const int dr = r - body_centre.row;
                const int dc = c - body_centre.col;
                if (dr * dr + dc * dc <= body_radius * body_radius) v(z, r, c) = 40 + (r + c + z) % 7;
            }
        }
    }
    return v;
}

Volume<std::uint8_t> box(int slices, Shape shape, int z0, int z1, int r0, int r1, int c0, int c1) {
    Volume<std::uint8_t> m(slices, shape, 0);
    for (int z = z0; z <= z1; ++z) {
        for (int r = r0; r <= r1; ++r) {
            for (int c = c0; c <= c1; ++c) m(z, r, c) = 1;
        }
    }
    return m;
}

void write_case(const fs::path& dir, const Volume<std::int32_t>& image, const std::map<std::string, Volume<std::uint8_t>>& masks,
                const VolumeSpacing& spacing) {
    fs::create_directories(dir / "masks");
    write_nifti(dir / "image.nii.gz", image, spacing);
    for (const auto& [name, m] : masks) write_nifti(dir / "masks" / (name + ".nii"), m, spacing);
}

}  // namespace

TEST_CASE("png round trips") {
    const fs::path dir = fresh_dir("png");
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Grid<double> image({17, 23});
    for (double& v : image.values()) v = quantize16(u(rng));
    write_image_png(dir / "img.png", image);
    CHECK(read_image_png(dir / "img.png") == image);

    const BinaryMask mask = oracle::random_mask(rng, {17, 23});
    write_mask_png(dir / "mask.png", mask);
    CHECK(read_mask_png(dir / "mask.png") == mask);

    std::ofstream(dir / "bogus.png") << "not a png";
    CHECK_THROWS_AS(read_mask_png(dir / "bogus.png"), Error);
    CHECK_THROWS_AS(read_mask_png(dir / "missing.png"), Error);
}

TEST_CASE("nifti round trip preserves voxels and spacing") {
    const fs::path dir = fresh_dir("nifti");
    const VolumeSpacing spacing{0.98, 0.98, 3.0};
    Volume<std::int32_t> v(3, {5, 7});
    for (std::size_t i = 0; i < v.data.size(); ++i) v.data[i] = static_cast<std::int32_t>(i * 37 % 3000) - 1024;
    for (const char* name : {"v.nii", "v.nii.gz"}) {
        write_nifti(dir / name, v, spacing);
        const NiftiImage back = read_nifti(dir / name);
        REQUIRE(back.values.slices == 3);
        REQUIRE(back.values.shape == Shape{5, 7});
        for (std::size_t i = 0; i < v.data.size(); ++i) CHECK(back.values.data[i] == v.data[i]);
        CHECK(back.spacing.row_mm == doctest::Approx(0.98).epsilon(1e-6));
        CHECK(back.spacing.col_mm == doctest::Approx(0.98).epsilon(1e-6));
        CHECK(back.spacing.slice_mm == 3.0);
    }
    CHECK_THROWS_AS(read_nifti(dir / "v.txt"), Error);
}

TEST_CASE("nifti header validation") {
    const fs::path dir = fresh_dir("nifti_bad");
    write_nifti(dir / "ok.nii", Volume<std::int32_t>(2, {4, 4}, 5), VolumeSpacing{});
    std::string bytes;
    {
        std::ifstream in(dir / "ok.nii", std::ios::binary);
        bytes.assign(std::istreambuf_iterator<char>(in), {});
    }
    auto expect = [&](const std::string& content, ErrorCode code) {
        std::ofstream(dir / "bad.nii", std::ios::binary) << content;
        try {
            read_nifti(dir / "bad.nii");
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.code() == code);
        }
    };
    std::string corrupt = bytes;
    corrupt[0] = 7;
    expect(corrupt, ErrorCode::CorruptHeader);
    std::string magic = bytes;
    magic[344] = 'x';
    expect(magic, ErrorCode::UnsupportedFormat);
    std::string datatype = bytes;
    datatype[70] = 99;
    expect(datatype, ErrorCode::UnsupportedFormat);
    expect(bytes.substr(0, bytes.size() - 3), ErrorCode::CorruptHeader);
    expect(bytes.substr(0, 100), ErrorCode::CorruptHeader);
}

TEST_CASE("ingest_volume") {
    const fs::path dir = fresh_dir("ingest/case01");
    const Shape shape{64, 64};
    const VolumeSpacing spacing{0.98, 0.98, 3.0};
    const auto image = phantom(4, shape, {30, 34}, 20);
    write_case(dir, image, {{"liver", box(4, shape, 0, 2, 20, 30, 25, 40)}, {"spleen", box(4, shape, 1, 3, 35, 40, 30, 33)}},
               spacing);
    const VolumeRecord rec = ingest_volume(dir);
    CHECK(rec.id == "case01");
    CHECK(rec.organ_masks.size() == 2);
    CHECK(rec.voxels == image);
    CHECK(rec.spacing.slice_mm == 3.0);
    CHECK(rec.spacing.row_mm == doctest::Approx(0.98).epsilon(1e-6));
    CHECK(ingest_volume(dir) == rec);

    write_nifti(dir / "masks" / "bad.nii", box(4, {64, 60}, 0, 0, 0, 0, 0, 0), spacing);
    try {
        ingest_volume(dir);
        FAIL("expected ShapeMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ShapeMismatch);
    }
    const fs::path empty = fresh_dir("ingest/empty");
    try {
        ingest_volume(empty);
        FAIL("expected UnsupportedFormat");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::UnsupportedFormat);
    }
}

TEST_CASE("crop_axial windows on the body centre of mass") {
    const Shape shape{512, 512};
    VolumeRecord rec;
    rec.id = "vol";
    rec.spacing = {0.98, 0.98, 3.0};
    rec.voxels = phantom(3, shape, {300, 200}, 150);
    rec.organ_masks.emplace("heart", box(3, shape, 0, 1, 280, 320, 180, 230));
    rec.organ_masks.emplace("far", box(3, shape, 2, 2, 0, 5, 0, 5));  // outside every crop window

    // Independent first-moment computation.
    double sr = 0.0;
    double sc = 0.0;
    double n = 0.0;
    for (int r = 0; r < 512; ++r) {
        for (int c = 0; c < 512; ++c) {
            if (rec.voxels(0, r, c) > -300) {
                sr += r;
                sc += c;
                n += 1.0;
            }
        }
    }
    const Point expected{static_cast<int>(std::lround(sr / n)) - 128, static_cast<int>(std::lround(sc / n)) - 128};
    CHECK(crop_origin(rec.voxels, 0) == expected);

    const auto slices = crop_axial(rec);
    REQUIRE(slices.size() == 2);  // heart on slices 0 and 1 only
    for (const auto& s : slices) {
        CHECK(s.organ == "heart");
        CHECK(s.image.shape() == Shape{256, 256});
        CHECK(s.provenance.row_offset == expected.row);
        CHECK(s.provenance.col_offset == expected.col);
        for (double v : s.image.values()) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
        for (int r = 0; r < 256; r += 7) {
            for (int c = 0; c < 256; c += 5) {
                const int z = s.provenance.slice_index;
                CHECK(s.image(r, c) == normalize_hu(rec.voxels(z, r + s.provenance.row_offset, c + s.provenance.col_offset)));
                CHECK(s.gt_mask(r, c) ==
                      (rec.organ_masks.at("heart")(z, r + s.provenance.row_offset, c + s.provenance.col_offset) != 0));
            }
        }
    }
    CHECK(normalize_hu(-1000) == 0.0);
    CHECK(normalize_hu(1000) == 1.0);
    CHECK(normalize_hu(3000) == 1.0);
    CHECK(normalize_hu(0) == 0.5);

    VolumeRecord edge = rec;
    edge.voxels = phantom(1, shape, {500, 500}, 30);
    edge.organ_masks.clear();
    CHECK(crop_origin(edge.voxels, 0) == Point{256, 256});

    VolumeRecord small;
    small.voxels = Volume<std::int32_t>(1, {200, 300});
    try {
        crop_axial(small);
        FAIL("expected TooSmall");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::TooSmall);
    }
}

TEST_CASE("synthetic dataset contract") {
    SynthParams params;
    const fs::path a = fresh_dir("synth_a");
    const fs::path b = fresh_dir("synth_b");
    const auto ma = synth_dataset(10, 5, a, params);
    const auto mb = synth_dataset(10, 5, b, params);
    REQUIRE(ma.entries.size() == 10);
    CHECK(ma.split_indices("train").size() == 8);
    CHECK(ma.split_indices("validation").size() == 1);
    CHECK(ma.split_indices("test").size() == 1);
    CHECK(ma.organs() == std::vector<std::string>{"blob"});

    const auto loaded = load_manifest(a / kManifestName);
    REQUIRE(loaded.entries.size() == 10);
    for (std::size_t i = 0; i < 10; ++i) {
        const SliceRecord sa = load_slice(loaded, loaded.entries[i]);
        const SliceRecord sb = load_slice(mb, mb.entries[i]);
        const SliceRecord direct = synth_slice(params, 5, static_cast<int>(i));
        CHECK(sa.image == sb.image);
        CHECK(sa.gt_mask == sb.gt_mask);
        CHECK(sa.image == direct.image);
        CHECK(sa.gt_mask == direct.gt_mask);
        const auto area = static_cast<int>(sa.gt_mask.count());
        CHECK(area >= params.min_area);
        CHECK(area <= params.max_area);
        CHECK(is_simply_connected(sa.gt_mask));
        for (double v : sa.image.values()) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
    CHECK_FALSE(synth_slice(params, 6, 0).gt_mask == synth_slice(params, 5, 0).gt_mask);
}

TEST_CASE("synthetic area bounds hold over a larger sample") {
    SynthParams params;
    params.min_area = 400;
    params.max_area = 1200;
    for (int i = 0; i < 40; ++i) {
        const auto s = synth_slice(params, 77, i);
        const auto area = static_cast<int>(s.gt_mask.count());
        CHECK(area >= 400);
        CHECK(area <= 1200);
        CHECK(is_simply_connected(s.gt_mask));
    }
}

TEST_CASE("manifest parsing errors") {
    const fs::path dir = fresh_dir("manifest");
    std::ofstream(dir / kManifestName) << R"({"v":2,"id":"x"})" << '\n';
    try {
        load_manifest(dir);
        FAIL("expected UnsupportedFormat");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::UnsupportedFormat);
    }
    std::ofstream(dir / kManifestName) << "{not json\n";
    CHECK_THROWS_AS(load_manifest(dir), Error);
    CHECK_THROWS_AS(load_manifest(dir / "nope.jsonl"), Error);
}
