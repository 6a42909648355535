// Copyright (C) 2026 The stt-seg Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include <unistd.h>

#include "doctest.h"
#include "stt/data/patches.hpp"
#include "stt/data/synthetic.hpp"
#include "stt/data/volume_io.hpp"
#include "stt/post/instances.hpp"

using namespace stt;
using namespace stt::data;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("stt_data_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string error_text(auto&& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

// Instance sizes, as a sorted list.
std::vector<std::int64_t> size_multiset(const LabelVolume& l) {
  std::map<std::uint32_t, std::int64_t> counts;
  for (auto v : l.labels)
    if (v) ++counts[v];
  std::vector<std::int64_t> out;
  for (auto& [k, c] : counts) out.push_back(c);
  std::sort(out.begin(), out.end());
  return out;
}

std::int64_t components_of(const LabelVolume& l, std::uint32_t id) {
  std::vector<std::uint8_t> m(l.labels.size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = l.labels[i] == id;
  return post::connected_components_3d(m, l.dims, 26).max_label();
}

}  // namespace

TEST_CASE("volume round trip is bit exact for every dtype") {
  TempDir dir;
  std::mt19937_64 rng(5);
  const Extents3 dims{3, 5, 7};
  const std::size_t n = 3 * 5 * 7;

  std::vector<float> f(n);
  std::uniform_real_distribution<float> ud(-1e6f, 1e6f);
  for (auto& v : f) v = ud(rng);
  f[0] = std::numeric_limits<float>::denorm_min();
  f[1] = -0.0f;
  std::vector<std::uint8_t> b(n);
  for (auto& v : b) v = static_cast<std::uint8_t>(rng());
  std::vector<std::uint32_t> u(n);
  for (auto& v : u) v = static_cast<std::uint32_t>(rng());

  for (int which = 0; which < 3; ++which) {
    VolumeFile vf;
    vf.dims = dims;
    vf.voxel_size_nm = {29.5, 4.0, 4.25};
    if (which == 0) vf.data = f;
    if (which == 1) vf.data = b;
    if (which == 2) vf.data = u;
    const auto stem = dir.path / ("vol" + std::to_string(which));
    save_volume(stem, vf);
    CHECK(fs::exists(stem.string() + ".json"));
    CHECK(fs::exists(stem.string() + ".raw"));
    for (const fs::path& p : {stem, fs::path(stem.string() + ".json"), fs::path(stem.string() + ".raw")}) {
      const VolumeFile back = load_volume(p);
      CHECK(back.dims == dims);
      CHECK(back.voxel_size_nm == vf.voxel_size_nm);
      CHECK(back.dtype() == vf.dtype());
      if (which == 0) {
        const auto& g = std::get<std::vector<float>>(back.data);
        CHECK(std::memcmp(g.data(), f.data(), n * sizeof(float)) == 0);
      }
      if (which == 1) CHECK(std::get<std::vector<std::uint8_t>>(back.data) == b);
      if (which == 2) CHECK(std::get<std::vector<std::uint32_t>>(back.data) == u);
    }
  }
}

TEST_CASE("big-endian files are byte swapped on load") {
  TempDir dir;
  const auto stem = dir.path / "be";
  std::ofstream(stem.string() + ".json")
      << R"({"dims":[1,1,2],"dtype":"u32","voxel_size_nm":[30,8,8],"byte_order":"big-endian"})";
  const unsigned char raw[] = {0, 0, 1, 2, 0xde, 0xad, 0xbe, 0xef};
  std::ofstream(stem.string() + ".raw", std::ios::binary).write(reinterpret_cast<const char*>(raw), 8);
  const auto v = load_volume(stem);
  const auto& d = std::get<std::vector<std::uint32_t>>(v.data);
  CHECK(d[0] == 0x0102u);
  CHECK(d[1] == 0xdeadbeefu);
}

TEST_CASE("truncated data names both byte counts") {
  TempDir dir;
  VolumeFile vf;
  vf.dims = {2, 4, 4};
  vf.data = std::vector<float>(32, 1.0f);
  const auto stem = dir.path / "t";
  save_volume(stem, vf);
  fs::resize_file(stem.string() + ".raw", 100);
  CHECK_THROWS_AS(load_volume(stem), LengthMismatchError);
  const std::string msg = error_text([&] { load_volume(stem); });
  CHECK(msg.find("100") != std::string::npos);
  CHECK(msg.find("128") != std::string::npos);
}

TEST_CASE("sidecar problems raise typed errors") {
  TempDir dir;
  const auto stem = dir.path / "s";
  std::ofstream(stem.string() + ".raw", std::ios::binary) << std::string(4, '\0');

  std::ofstream(stem.string() + ".json")
      << R"({"dims":[1,1,1],"dtype":"f16","voxel_size_nm":[30,8,8],"byte_order":"little-endian"})";
  CHECK_THROWS_AS(load_volume(stem), UnknownDtypeError);
  CHECK(error_text([&] { load_volume(stem); }).find("f16") != std::string::npos);

  std::ofstream(stem.string() + ".json") << "{not json";
  CHECK_THROWS_AS(load_volume(stem), MalformedSidecarError);
  std::ofstream(stem.string() + ".json") << R"({"dtype":"f32"})";
  CHECK_THROWS_AS(load_volume(stem), MalformedSidecarError);
  std::ofstream(stem.string() + ".json") << R"({"dims":[1,1],"dtype":"f32","voxel_size_nm":[30,8,8]})";
  CHECK_THROWS_AS(load_volume(stem), MalformedSidecarError);
  CHECK_THROWS_AS(load_volume(dir.path / "missing"), IoError);
  CHECK_THROWS_AS(parse_dtype("int8"), UnknownDtypeError);
  CHECK(parse_dtype("u32") == DType::kU32);
  CHECK(dtype_width(DType::kU8) == 1);
}

TEST_CASE("u8 images are scaled to the unit interval and labels accept u8") {
  TempDir dir;
  VolumeFile vf;
  vf.dims = {1, 1, 3};
  vf.data = std::vector<std::uint8_t>{0, 51, 255};
  save_volume(dir.path / "img", vf);
  const auto img = load_image(dir.path / "img");
  CHECK(img.values[0] == 0.0f);
  CHECK(img.values[1] == doctest::Approx(0.2));
  CHECK(img.values[2] == 1.0f);
  const auto lab = load_labels(dir.path / "img");
  CHECK(lab.labels == std::vector<std::uint32_t>{0, 51, 255});

  vf.data = std::vector<std::uint32_t>{1, 2, 3};
  save_volume(dir.path / "u32", vf);
  CHECK_THROWS_AS(load_image(dir.path / "u32"), ValidationError);
  vf.data = std::vector<float>{1, 2, 3};
  save_volume(dir.path / "f32", vf);
  CHECK_THROWS_AS(load_labels(dir.path / "f32"), ValidationError);
}

TEST_CASE("crop copies the requested block") {
  ImageVolume img{{4, 5, 6}, {30, 8, 8}, {}};
  LabelVolume lab({4, 5, 6});
  for (std::int64_t i = 0; i < 120; ++i) {
    img.values.push_back(static_cast<float>(i));
    lab.labels[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(i);
  }
  const auto p = crop(img, lab, {1, 2, 3}, {2, 3, 3});
  for (std::int64_t t = 0; t < 2; ++t)
    for (std::int64_t h = 0; h < 3; ++h)
      for (std::int64_t w = 0; w < 3; ++w) {
        const auto src = lab.index(1 + t, 2 + h, 3 + w);
        CHECK(p.image[static_cast<std::size_t>(p.labels.index(t, h, w))] == static_cast<float>(src));
        CHECK(p.labels.at(t, h, w) == static_cast<std::uint32_t>(src));
      }
  CHECK_THROWS_AS(crop(img, lab, {3, 0, 0}, {2, 1, 1}), ShapeError);
}

TEST_CASE("sample_patch covers the whole volume and is deterministic") {
  ImageVolume img{{2, 4, 4}, {30, 8, 8}, std::vector<float>(32, 0.5f)};
  LabelVolume lab({2, 4, 4});
  Rng rng(1);
  const auto whole = sample_patch(img, lab, {2, 4, 4}, rng);
  CHECK(whole.corner == Extents3{0, 0, 0});
  CHECK(whole.image == img.values);
  CHECK_THROWS_AS(sample_patch(img, lab, {3, 4, 4}, rng), ShapeError);

  Rng a(9), b(9);
  for (int i = 0; i < 20; ++i) {
    CHECK(sample_patch(img, lab, {1, 2, 3}, a).corner == sample_patch(img, lab, {1, 2, 3}, b).corner);
  }
}

TEST_CASE("rebalanced sampling favours foreground patches") {
  // foreground only in the W < 32 half of a 64-wide volume; small patches
  ImageVolume img{{4, 64, 64}, {30, 8, 8}, std::vector<float>(4 * 64 * 64, 0.5f)};
  LabelVolume lab({4, 64, 64});
  for (std::int64_t t = 0; t < 4; ++t)
    for (std::int64_t h = 0; h < 64; ++h)
      for (std::int64_t w = 0; w < 24; ++w) lab.at(t, h, w) = 1;
  Rng rng(3);
  int hits = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto p = sample_patch(img, lab, {2, 8, 8}, rng);
    hits += std::any_of(p.labels.labels.begin(), p.labels.labels.end(), [](auto v) { return v != 0; });
  }
  // a single uniform draw hits with probability 31/57; ten draws almost surely
  CHECK(hits >= 950);
  int plain = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto p = sample_patch(img, lab, {2, 8, 8}, rng, 0.0);
    plain += std::any_of(p.labels.labels.begin(), p.labels.labels.end(), [](auto v) { return v != 0; });
  }
  CHECK(plain < 650);
}

TEST_CASE("augmentation identities") {
  ImageVolume img{{3, 6, 6}, {30, 8, 8}, {}};
  LabelVolume lab({3, 6, 6});
  std::mt19937_64 g(4);
  for (std::int64_t i = 0; i < lab.size(); ++i) {
    img.values.push_back(static_cast<float>(i) / 200.0f);
    lab.labels[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(g() % 4);
  }
  const auto base = crop(img, lab, {0, 0, 0}, {3, 6, 6});

  Rng rng(8);
  auto p = base;
  augment(p, rng, AugmentConfig::none());
  CHECK(p.image == base.image);
  CHECK(p.labels.labels == base.labels.labels);

  for (int axis = 0; axis < 3; ++axis) {
    auto q = base;
    flip_axis(q, axis);
    CHECK(q.labels.labels != base.labels.labels);
    flip_axis(q, axis);
    CHECK(q.image == base.image);
    CHECK(q.labels.labels == base.labels.labels);
  }
  auto r = base;
  rotate90(r);
  CHECK(r.labels.at(0, 0, 0) == base.labels.at(0, 0, 5));
  rotate90(r);
  rotate90(r);
  rotate90(r);
  CHECK(r.image == base.image);

  auto bad = crop(img, lab, {0, 0, 0}, {3, 4, 6});
  CHECK_THROWS_AS(rotate90(bad), ShapeError);
  Rng rng2(1);
  AugmentConfig only_rot = AugmentConfig::none();
  only_rot.rot90 = 1.0;
  augment(bad, rng2, only_rot);  // skipped on non-square planes
  CHECK(bad.dims == Extents3{3, 4, 6});
}

TEST_CASE("geometric augmentation preserves instance sizes and intensities stay in range") {
  SynthSpec spec;
  spec.dims = {8, 32, 32};
  spec.min_instances = 2;
  spec.max_instances = 3;
  const auto vol = generate_synthetic(spec, 17);
  const auto base = crop(vol.image, vol.labels, {0, 0, 0}, spec.dims);
  const auto sizes = size_multiset(base.labels);
  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    auto p = base;
    augment(p, rng, AugmentConfig::geometric_only());
    CHECK(size_multiset(p.labels) == sizes);
    auto q = base;
    augment(q, rng, AugmentConfig{});
    CHECK(size_multiset(q.labels) == sizes);
    for (float v : q.image) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
  }
}

TEST_CASE("a single synthetic instance forms one component") {
  SynthSpec spec;
  spec.min_instances = spec.max_instances = 1;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto v = generate_synthetic(spec, seed);
    CHECK(v.labels.max_label() == 1);
    CHECK(components_of(v.labels, 1) == 1);
  }
}

TEST_CASE("noiseless synthetic foreground is recovered by a threshold") {
  SynthSpec spec;
  spec.noise_sigma = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto v = generate_synthetic(spec, seed);
    const double cut = foreground_ceiling(spec) + 1e-6;
    for (std::size_t i = 0; i < v.labels.labels.size(); ++i) {
      CHECK((v.image.values[i] <= cut) == (v.labels.labels[i] != 0));
    }
  }
}

TEST_CASE("synthetic labels are contiguous and each instance connected") {
  SynthSpec spec;
  spec.touch_probability = 0.3;
  spec.distractors = true;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto v = generate_synthetic(spec, seed);
    std::set<std::uint32_t> ids(v.labels.labels.begin(), v.labels.labels.end());
    ids.erase(0);
    const auto k = static_cast<std::int64_t>(ids.size());
    CHECK(k >= spec.min_instances);
    CHECK(k <= spec.max_instances);
    CHECK(*ids.rbegin() == static_cast<std::uint32_t>(k));
    for (auto id : ids) {
      INFO("seed " << seed << " id " << id);
      CHECK(components_of(v.labels, id) == 1);
    }
    for (float x : v.image.values) {
      CHECK(x >= 0.0f);
      CHECK(x <= 1.0f);
    }
  }
}

TEST_CASE("synthetic volumes are a pure function of the seed") {
  SynthSpec spec;
  spec.distractors = true;
  const auto a = generate_synthetic(spec, 42);
  const auto b = generate_synthetic(spec, 42);
  const auto c = generate_synthetic(spec, 43);
  CHECK(a.image.values == b.image.values);
  CHECK(a.labels.labels == b.labels.labels);
  CHECK(a.image.values != c.image.values);
}

TEST_CASE("synthetic spec validation and packing failure") {
  SynthSpec s;
  s.dims = {4, 64, 64};
  CHECK_THROWS_AS(generate_synthetic(s, 0), ValidationError);
  s = {};
  s.min_instances = 5;
  s.max_instances = 2;
  CHECK_THROWS_AS(s.validate(), ValidationError);
  s = {};
  s.axis_long = {8, 4};
  CHECK_THROWS_AS(s.validate(), ValidationError);

  s = {};
  s.dims = {8, 32, 32};
  s.min_instances = s.max_instances = 60;
  s.max_retries = 20;
  CHECK_THROWS_AS(generate_synthetic(s, 1), PackingError);
}
