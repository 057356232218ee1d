#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <queue>
#include <set>

#include "roixai/data/augment.hpp"
#include "roixai/data/manifest.hpp"
#include "roixai/data/npy.hpp"
#include "roixai/data/phantom.hpp"
#include "roixai/data/split.hpp"

using namespace roixai;
namespace fs = std::filesystem;

namespace {

std::vector<std::uint8_t> read_bytes(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

fs::path golden(const char* name) { return fs::path(ROIXAI_TEST_DATA_DIR) / name; }

fs::path scratch_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / ("roixai_data_io_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string header_text(const std::vector<std::uint8_t>& bytes) {
  const std::size_t len = bytes[8] | (bytes[9] << 8);
  return {reinterpret_cast<const char*>(bytes.data() + 10), len};
}

template <class T>
void expect_bitwise_roundtrip(const Shape& shape, const std::vector<T>& values) {
  const auto a = NpyArray::from<T>(shape, std::span<const T>(values));
  const auto b = decode_npy(encode_npy(a));
  EXPECT_EQ(b.dtype, a.dtype);
  EXPECT_EQ(b.shape, shape);
  ASSERT_EQ(b.payload, a.payload);
  const auto back = b.template values<T>();
  ASSERT_EQ(back.size(), values.size());
  EXPECT_EQ(std::memcmp(back.data(), values.data(), values.size() * sizeof(T)), 0);
}

// 4-connected components among mask pixels of one slice.
std::size_t components(const Volume& v, std::size_t s) {
  const std::size_t H = v.height, W = v.width;
  std::vector<char> seen(H * W, 0);
  std::size_t count = 0;
  for (std::size_t start = 0; start < H * W; ++start) {
    if (!v.roi_mask[s * H * W + start] || seen[start]) continue;
    ++count;
    std::queue<std::size_t> q;
    q.push(start);
    seen[start] = 1;
    while (!q.empty()) {
      const auto i = q.front();
      q.pop();
      const std::size_t y = i / W, x = i % W;
      const std::size_t nb[4] = {y > 0 ? i - W : i, y + 1 < H ? i + W : i, x > 0 ? i - 1 : i, x + 1 < W ? i + 1 : i};
      for (auto j : nb)
        if (!seen[j] && v.roi_mask[s * H * W + j]) seen[j] = 1, q.push(j);
    }
  }
  return count;
}

double mean_abs_diff(const Volume& a, const Volume& b) {
  double t = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) t += std::abs(static_cast<double>(a.data[i]) - b.data[i]);
  return t / static_cast<double>(a.data.size());
}

}  // namespace

// ---------------------------------------------------------------- container

TEST(Npy, MatchesNumpyBytesExactly) {
  std::vector<float> f4(48);
  for (std::size_t i = 0; i < 48; ++i) f4[i] = static_cast<float>(i) / 7.0f;
  EXPECT_EQ(encode_npy(NpyArray::from<float>({3, 4, 4}, std::span<const float>(f4))), read_bytes(golden("f4_3x4x4.npy")));

  std::vector<double> f8 = {-1.0, -0.5, 0.0, 0.5, 1.0};
  EXPECT_EQ(encode_npy(NpyArray::from<double>({5}, std::span<const double>(f8))), read_bytes(golden("f8_5.npy")));

  std::vector<std::uint8_t> u1 = {200};
  EXPECT_EQ(encode_npy(NpyArray::from<std::uint8_t>({1, 1, 1}, std::span<const std::uint8_t>(u1))),
            read_bytes(golden("u1_1x1x1.npy")));

  std::vector<float> scalar = {2.5f};
  EXPECT_EQ(encode_npy(NpyArray::from<float>({}, std::span<const float>(scalar))), read_bytes(golden("f4_scalar.npy")));
}

TEST(Npy, MagicVersionAndHeaderLayout) {
  std::vector<float> v(48, 0.25f);
  const auto bytes = encode_npy(NpyArray::from<float>({3, 4, 4}, std::span<const float>(v)));
  const std::uint8_t magic[8] = {0x93, 0x4E, 0x55, 0x4D, 0x50, 0x59, 0x01, 0x00};
  ASSERT_GE(bytes.size(), 10u);
  EXPECT_EQ(std::memcmp(bytes.data(), magic, 8), 0);
  const std::size_t len = bytes[8] | (bytes[9] << 8);
  EXPECT_EQ((10 + len) % 64, 0u);
  EXPECT_EQ(bytes.size(), 10 + len + 48 * 4);
  const auto h = header_text(bytes);
  EXPECT_NE(h.find("'descr': '<f4'"), std::string::npos);
  EXPECT_NE(h.find("'fortran_order': False"), std::string::npos);
  EXPECT_NE(h.find("'shape': (3, 4, 4)"), std::string::npos);
  EXPECT_EQ(h.back(), '\n');
  EXPECT_EQ(h.find_first_not_of(' ', h.find('}') + 1), h.size() - 1);
}

TEST(Npy, HeaderAlignmentHoldsForManyShapes) {
  for (const Shape& shape : {Shape{}, Shape{7}, Shape{1, 1, 1}, Shape{61, 256, 256}, Shape{123456789, 2}}) {
    for (DType d : {DType::f4, DType::f8, DType::u1}) {
      const auto h = detail::npy_header(d, shape);
      EXPECT_EQ((10 + h.size()) % 64, 0u);
      EXPECT_EQ(h.back(), '\n');
      const auto parsed = detail::parse_npy_header(h);
      EXPECT_EQ(parsed.shape, shape);
      EXPECT_EQ(parsed.descr, dtype_descr(d));
    }
  }
}

TEST(Npy, ReadsNumpyFiles) {
  const auto a = read_npy(golden("f4_3x4x4.npy").string());
  EXPECT_EQ(a.dtype, DType::f4);
  EXPECT_EQ(a.shape, (Shape{3, 4, 4}));
  const auto v = a.values<float>();
  for (std::size_t i = 0; i < 48; ++i) EXPECT_EQ(v[i], static_cast<float>(i) / 7.0f);
  const auto b = read_npy(golden("f8_5.npy").string());
  EXPECT_EQ(b.values<double>(), (std::vector<double>{-1.0, -0.5, 0.0, 0.5, 1.0}));
  EXPECT_EQ(read_npy(golden("u1_1x1x1.npy").string()).values<std::uint8_t>(), std::vector<std::uint8_t>{200});
  const auto s = read_npy(golden("f4_scalar.npy").string());
  EXPECT_TRUE(s.shape.empty());
  EXPECT_EQ(s.values<float>(), std::vector<float>{2.5f});
}

TEST(Npy, BitwiseRoundtripAllDtypes) {
  Rng rng(17);
  for (const Shape& shape : {Shape{1, 1, 1}, Shape{}, Shape{3, 4, 4}, Shape{2, 5, 7}, Shape{0}, Shape{9}}) {
    const std::size_t n = shape_numel(shape);
    std::vector<float> f4(n);
    std::vector<double> f8(n);
    std::vector<std::uint8_t> u1(n);
    for (std::size_t i = 0; i < n; ++i) {
      f4[i] = static_cast<float>(rng.normal() * 1e3);
      f8[i] = rng.normal() * 1e-300;
      u1[i] = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    }
    if (n > 2) {
      f4[0] = -0.0f, f4[1] = std::numeric_limits<float>::quiet_NaN(), f4[2] = std::numeric_limits<float>::infinity();
      f8[0] = std::numeric_limits<double>::denorm_min();
    }
    expect_bitwise_roundtrip(shape, f4);
    expect_bitwise_roundtrip(shape, f8);
    expect_bitwise_roundtrip(shape, u1);
  }
}

TEST(Npy, FileRoundtrip) {
  const auto dir = scratch_dir("roundtrip");
  std::vector<double> v = {1.5, -2.25, 3.0, 1e-310};
  const auto a = NpyArray::from<double>({2, 2}, std::span<const double>(v));
  write_npy((dir / "a.npy").string(), a);
  const auto b = read_npy((dir / "a.npy").string());
  EXPECT_EQ(b.payload, a.payload);
  EXPECT_EQ(b.shape, a.shape);
}

TEST(Npy, DistinctErrorKinds) {
  auto good = read_bytes(golden("f4_3x4x4.npy"));

  auto bad_magic = good;
  bad_magic[1] = 'X';
  EXPECT_THROW(decode_npy(bad_magic), NpyBadMagic);
  EXPECT_THROW(decode_npy(std::vector<std::uint8_t>{0x93, 'N'}), NpyBadMagic);

  EXPECT_THROW(read_npy(golden("f4_big_2x3.npy").string()), NpyUnsupported);
  EXPECT_THROW(read_npy(golden("f4_fortran_2x3.npy").string()), NpyUnsupported);
  auto version = good;
  version[6] = 3;
  EXPECT_THROW(decode_npy(version), NpyUnsupported);
  auto dtype = good;
  const auto h = header_text(good);
  const auto at = h.find("<f4");
  dtype[10 + at + 1] = 'i';  // '<i4'
  EXPECT_THROW(decode_npy(dtype), NpyUnsupported);

  auto truncated = good;
  truncated.pop_back();
  EXPECT_THROW(decode_npy(truncated), NpyTruncated);
  EXPECT_THROW(decode_npy(std::span<const std::uint8_t>(good.data(), 40)), NpyTruncated);

  auto malformed = good;
  malformed[10] = '[';
  EXPECT_THROW(decode_npy(malformed), NpyMalformedHeader);

  // All four are NpyError and distinct from each other.
  EXPECT_THROW(decode_npy(truncated), NpyError);
  bool caught_as_bad_magic = false;
  try {
    decode_npy(truncated);
  } catch (const NpyBadMagic&) {
    caught_as_bad_magic = true;
  } catch (const NpyError&) {
  }
  EXPECT_FALSE(caught_as_bad_magic);
}

TEST(Npy, ValueTypeMismatchIsRejected) {
  const auto a = read_npy(golden("u1_1x1x1.npy").string());
  EXPECT_THROW(a.values<float>(), std::invalid_argument);
  EXPECT_EQ(a.as_double(), std::vector<double>{200.0});
}

// ---------------------------------------------------------------- phantoms

TEST(Phantom, DeterministicInSeedAndIndex) {
  PhantomParams p;
  p.seed = 5;
  const auto a = generate_phantom(p, 3), b = generate_phantom(p, 3);
  EXPECT_EQ(a.data, b.data);
  EXPECT_EQ(a.roi_mask, b.roi_mask);
  EXPECT_EQ(a.label, b.label);
  EXPECT_EQ(a.patient_id, b.patient_id);
  EXPECT_NE(generate_phantom(p, 4).data, a.data);
  p.seed = 6;
  EXPECT_NE(generate_phantom(p, 3).data, a.data);
}

TEST(Phantom, ZeroLesionProbabilityNeverLabelsPositive) {
  PhantomParams p;
  p.edge = 16;
  p.s_min = p.s_max = 2;
  p.lesion_probability = 0.0;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    const auto v = generate_phantom(p, i);
    ASSERT_EQ(v.label, 0);
    ASSERT_FALSE(v.has_mask());
  }
}

TEST(Phantom, PositiveRateWithinThreeStandardErrors) {
  PhantomParams p;
  p.edge = 16;
  p.s_min = p.s_max = 2;
  p.seed = 11;
  const int n = 2000;
  int pos = 0;
  for (int i = 0; i < n; ++i) pos += generate_phantom(p, static_cast<std::uint64_t>(i)).label == 1;
  const double frac = static_cast<double>(pos) / n, se = std::sqrt(0.35 * 0.65 / n);
  EXPECT_LE(std::abs(frac - 0.35), 3 * se) << frac;
}

TEST(Phantom, InvariantsHoldAcrossDraws) {
  PhantomParams p;
  p.seed = 2;
  p.lesion_probability = 0.5;
  int positives = 0;
  for (std::uint64_t i = 0; i < 60; ++i) {
    const auto v = generate_phantom(p, i);
    ASSERT_NO_THROW(v.validate());
    EXPECT_EQ(v.plane, Plane::sagittal);
    EXPECT_GE(v.slices, p.s_min);
    EXPECT_LE(v.slices, p.s_max);
    EXPECT_EQ(v.height, 64u);
    EXPECT_EQ(v.width, 64u);
    for (float x : v.data) ASSERT_TRUE(x >= 0.0f && x <= 1.0f);
    EXPECT_EQ(v.data[0], 0.0f);  // background corner
    ASSERT_EQ(v.label == 1, v.has_mask());
    if (!v.has_mask()) continue;
    ++positives;
    // Mask occupies a contiguous run of slices and is one component in each.
    std::vector<std::size_t> marked;
    for (std::size_t s = 0; s < v.slices; ++s) {
      const auto beg = v.roi_mask.begin() + static_cast<std::ptrdiff_t>(s * v.slice_size());
      if (std::any_of(beg, beg + static_cast<std::ptrdiff_t>(v.slice_size()), [](auto m) { return m != 0; })) {
        marked.push_back(s);
        EXPECT_EQ(components(v, s), 1u) << "volume " << i << " slice " << s;
      }
    }
    ASSERT_FALSE(marked.empty());
    EXPECT_EQ(marked.back() - marked.front() + 1, marked.size());
    // The lesion is bright against its dark surroundings.
    double in = 0, n_in = 0;
    for (std::size_t k = 0; k < v.data.size(); ++k)
      if (v.roi_mask[k]) in += v.data[k], ++n_in;
    EXPECT_GT(in / n_in, 0.85);
  }
  EXPECT_GT(positives, 10);
}

TEST(Phantom, RejectsInvalidParams) {
  PhantomParams p;
  p.edge = 40;
  EXPECT_THROW(generate_phantom(p, 0), std::invalid_argument);
  p = {};
  p.lesion_radius_min = 1.5;
  EXPECT_THROW(generate_phantom(p, 0), std::invalid_argument);
  p = {};
  p.s_min = 8, p.s_max = 4;
  EXPECT_THROW(generate_phantom(p, 0), std::invalid_argument);
  p = {};
  p.lesion_probability = 1.2;
  EXPECT_THROW(generate_phantom(p, 0), std::invalid_argument);
  p = {};
  p.noise_level = -0.1;
  EXPECT_THROW(generate_phantom(p, 0), std::invalid_argument);
}

// ---------------------------------------------------------------- augmentation

namespace {
Volume positive_phantom(std::uint64_t seed) {
  PhantomParams p;
  p.seed = seed;
  p.lesion_probability = 1.0;
  return generate_phantom(p, 0);
}
}  // namespace

TEST(Augment, DefaultsAndShiftScaling) {
  const AugmentParams a;
  EXPECT_EQ(a.max_rotation_deg, 25.0);
  EXPECT_EQ(a.max_shift_px, 25.0);
  EXPECT_EQ(a.flip_probability, 0.5);
  EXPECT_DOUBLE_EQ(a.shift_limit(256), 25.0);
  EXPECT_DOUBLE_EQ(a.shift_limit(64), 6.25);
}

TEST(Augment, ZeroParametersAreIdentity) {
  const auto v = positive_phantom(1);
  const AugmentParams none{0.0, 0.0, 0.0};
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto out = augment(v, none, seed);
    EXPECT_EQ(out.data, v.data);
    EXPECT_EQ(out.roi_mask, v.roi_mask);
  }
}

TEST(Augment, FlipIsAnInvolution) {
  const auto v = positive_phantom(2);
  RigidTransform flip;
  flip.flip = true;
  const auto once = apply_transform(v, flip);
  EXPECT_NE(once.data, v.data);
  EXPECT_EQ(once.at(0, 5, 0), v.at(0, 5, v.width - 1));
  const auto twice = apply_transform(once, flip);
  EXPECT_EQ(twice.data, v.data);
  EXPECT_EQ(twice.roi_mask, v.roi_mask);

  const AugmentParams always_flip{0.0, 0.0, 1.0};
  EXPECT_EQ(augment(augment(v, always_flip, 1), always_flip, 2).data, v.data);
}

TEST(Augment, RotationRoundTripLosesOnlyInterpolation) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto v = positive_phantom(seed);
    RigidTransform fwd, back;
    fwd.rotation_deg = 20.0;
    back.rotation_deg = -20.0;
    const auto r = apply_transform(apply_transform(v, fwd), back);
    EXPECT_LE(mean_abs_diff(r, v), 0.02);
  }
}

TEST(Augment, IntegerShiftMovesContent) {
  const auto v = positive_phantom(3);
  RigidTransform t;
  t.shift_x = 3.0;
  t.shift_y = -2.0;
  const auto out = apply_transform(v, t);
  for (std::size_t y = 0; y + 2 < v.height; ++y)
    for (std::size_t x = 3; x < v.width; ++x) ASSERT_EQ(out.at(1, y, x), v.at(1, y + 2, x - 3));
  for (std::size_t y = 0; y < v.height; ++y) EXPECT_EQ(out.at(1, y, 0), 0.0f);
}

TEST(Augment, PreservesExtentRangeLabelAndBinaryMask) {
  const auto v = positive_phantom(4);
  const AugmentParams p;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto out = augment(v, p, seed);
    EXPECT_EQ(out.slices, v.slices);
    EXPECT_EQ(out.height, v.height);
    EXPECT_EQ(out.width, v.width);
    EXPECT_EQ(out.label, v.label);
    ASSERT_EQ(out.roi_mask.size(), v.roi_mask.size());
    for (float x : out.data) ASSERT_TRUE(x >= 0.0f && x <= 1.0f);
    for (auto m : out.roi_mask) ASSERT_LE(m, 1);
  }
}

TEST(Augment, SameTransformOnEverySliceAndMask) {
  auto v = positive_phantom(5);
  // Make every slice identical; the augmented slices must then agree too.
  for (std::size_t s = 1; s < v.slices; ++s) {
    std::copy_n(v.data.begin(), v.slice_size(), v.data.begin() + static_cast<std::ptrdiff_t>(s * v.slice_size()));
  }
  v.roi_mask.assign(v.data.size(), 0);
  for (std::size_t k = 0; k < v.data.size(); ++k) v.roi_mask[k] = v.data[k] > 0.5f;
  const auto out = augment(v, AugmentParams{}, 9);
  for (std::size_t s = 1; s < out.slices; ++s)
    for (std::size_t k = 0; k < out.slice_size(); ++k) {
      ASSERT_EQ(out.data[s * out.slice_size() + k], out.data[k]);
      ASSERT_EQ(out.roi_mask[s * out.slice_size() + k], out.roi_mask[k]);
    }
}

TEST(Augment, DrawsAreSeededAndBounded) {
  const AugmentParams p;
  bool flipped = false, kept = false;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto t = draw_transform(p, 64, seed);
    EXPECT_LE(std::abs(t.rotation_deg), 25.0);
    EXPECT_LE(std::abs(t.shift_x), 6.25);
    EXPECT_LE(std::abs(t.shift_y), 6.25);
    flipped |= t.flip;
    kept |= !t.flip;
    const auto again = draw_transform(p, 64, seed);
    EXPECT_EQ(again.rotation_deg, t.rotation_deg);
    EXPECT_EQ(again.flip, t.flip);
  }
  EXPECT_TRUE(flipped && kept);
  EXPECT_THROW(draw_transform(AugmentParams{-1.0, 0.0, 0.5}, 64, 0), std::invalid_argument);
  EXPECT_THROW(draw_transform(AugmentParams{1.0, 0.0, 1.5}, 64, 0), std::invalid_argument);
}

// ---------------------------------------------------------------- splits

TEST(Split, EightTwoOfTen) {
  const auto s = make_split(10, 0.8, 3);
  EXPECT_EQ(s.train.size(), 8u);
  EXPECT_EQ(s.validation.size(), 2u);
  std::set<std::size_t> all(s.train.begin(), s.train.end());
  for (auto i : s.validation) EXPECT_TRUE(all.insert(i).second);
  EXPECT_EQ(all.size(), 10u);
}

TEST(Split, DeterministicInSeed) {
  const auto a = make_split(50, 0.7, 42), b = make_split(50, 0.7, 42);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.validation, b.validation);
  EXPECT_NE(make_split(50, 0.7, 43).train, a.train);
}

TEST(Split, DisjointAndExhaustiveOverHundredSeeds) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto s = make_split(37, 0.75, seed);
    std::vector<int> seen(37, 0);
    for (auto i : s.train) ++seen[i];
    for (auto i : s.validation) ++seen[i];
    for (int c : seen) ASSERT_EQ(c, 1) << "seed " << seed;
  }
}

TEST(Split, EachSideGetsAPositive) {
  std::vector<int> labels(20, 0);
  labels[4] = labels[13] = 1;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto s = make_split(20, 0.8, seed, labels);
    EXPECT_TRUE(detail::has_positive(s.train, labels));
    EXPECT_TRUE(detail::has_positive(s.validation, labels));
    const auto again = make_split(20, 0.8, seed, labels);
    EXPECT_EQ(again.validation, s.validation);
  }
}

TEST(Split, RejectsBadInputs) {
  EXPECT_THROW(make_split(1, 0.5, 0), std::invalid_argument);
  EXPECT_THROW(make_split(10, 0.0, 0), std::invalid_argument);
  EXPECT_THROW(make_split(10, 1.0, 0), std::invalid_argument);
  std::vector<int> one_positive(10, 0);
  one_positive[0] = 1;
  EXPECT_THROW(make_split(10, 0.5, 0, one_positive), std::invalid_argument);
  // Extreme fractions still leave both sides nonempty.
  EXPECT_EQ(make_split(3, 0.01, 0).train.size(), 1u);
  EXPECT_EQ(make_split(3, 0.99, 0).validation.size(), 1u);
}

// ---------------------------------------------------------------- manifest and files

TEST(Manifest, RoundtripWithRelativePaths) {
  const auto dir = scratch_dir("manifest");
  std::vector<ManifestEntry> entries = {{"p1", "a.npy", 1, "a_mask.npy"}, {"p,2", "sub/b.npy", std::nullopt, ""},
                                        {"p3", "c.npy", 0, ""}};
  write_manifest(dir / "m.csv", entries);
  const auto back = read_manifest(dir / "m.csv");
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back[0].patient_id, "p1");
  EXPECT_EQ(back[0].path, dir / "a.npy");
  EXPECT_EQ(back[0].label, 1);
  EXPECT_EQ(back[0].mask_path, dir / "a_mask.npy");
  EXPECT_EQ(back[1].patient_id, "p,2");
  EXPECT_EQ(back[1].path, dir / "sub/b.npy");
  EXPECT_FALSE(back[1].label);
  EXPECT_TRUE(back[1].mask_path.empty());
  EXPECT_EQ(back[2].label, 0);
}

TEST(Manifest, RejectsMalformedFiles) {
  const auto dir = scratch_dir("manifest_bad");
  auto write = [&](const std::string& text) {
    std::ofstream(dir / "m.csv") << text;
    return dir / "m.csv";
  };
  EXPECT_THROW(read_manifest(write("patient_id,path\np,a.npy\n")), ManifestError);
  EXPECT_THROW(read_manifest(write("patient_id,path,label,extra\np,a.npy,1,x\n")), ManifestError);
  EXPECT_THROW(read_manifest(write("patient_id,path,label\np,a.npy,2\n")), ManifestError);
  EXPECT_THROW(read_manifest(write("patient_id,path,label\np,a.npy\n")), ManifestError);
  EXPECT_THROW(read_manifest(write("patient_id,path,label\n")), ManifestError);
  EXPECT_THROW(read_manifest(dir / "missing.csv"), ManifestError);
  EXPECT_NO_THROW(read_manifest(write("\xEF\xBB\xBFpatient_id,path,label\r\np,a.npy,1\r\n")));
}

TEST(VolumeFile, PhantomSurvivesDiskRoundtrip) {
  const auto dir = scratch_dir("volume");
  const auto v = positive_phantom(7);
  write_npy((dir / "v.npy").string(), volume_array(v));
  write_npy((dir / "v_mask.npy").string(), mask_array(v));
  const ManifestEntry e{"case", dir / "v.npy", 1, dir / "v_mask.npy"};
  const auto back = load_entry(e, IntensityScaling::none);
  EXPECT_EQ(back.data, v.data);
  EXPECT_EQ(back.roi_mask, v.roi_mask);
  EXPECT_EQ(back.label, 1);
  EXPECT_EQ(back.patient_id, "case");
}

TEST(VolumeFile, MinMaxNormalizesRealStyleUint8Stacks) {
  const auto dir = scratch_dir("real");
  const std::size_t s = 17;
  std::vector<std::uint8_t> raw(s * 256 * 256);
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = static_cast<std::uint8_t>(20 + (i * 31) % 180);
  write_npy((dir / "0000.npy").string(), NpyArray::from<std::uint8_t>({s, 256, 256}, std::span<const std::uint8_t>(raw)));
  const auto v = load_volume_file(dir / "0000.npy");
  EXPECT_EQ(v.slices, s);
  EXPECT_EQ(v.height, 256u);
  EXPECT_EQ(v.width, 256u);
  EXPECT_EQ(v.patient_id, "0000");
  const auto [lo, hi] = std::minmax_element(v.data.begin(), v.data.end());
  EXPECT_EQ(*lo, 0.0f);
  EXPECT_EQ(*hi, 1.0f);
  EXPECT_THROW(load_volume_file(dir / "0000.npy", IntensityScaling::none), std::runtime_error);

  std::vector<float> flat(8, 3.0f);
  write_npy((dir / "flat.npy").string(), NpyArray::from<float>({2, 2, 2}, std::span<const float>(flat)));
  for (float x : load_volume_file(dir / "flat.npy").data) EXPECT_EQ(x, 0.0f);
  write_npy((dir / "flat2d.npy").string(), NpyArray::from<float>({2, 4}, std::span<const float>(flat)));
  EXPECT_THROW(load_volume_file(dir / "flat2d.npy"), std::runtime_error);
}

TEST(VolumeFile, ResizeKeepsCornersAndMaskBinary) {
  const auto v = positive_phantom(8);
  const auto up = resize_volume(v, 224);
  EXPECT_EQ(up.height, 224u);
  EXPECT_EQ(up.width, 224u);
  EXPECT_EQ(up.slices, v.slices);
  EXPECT_EQ(up.at(0, 0, 0), v.at(0, 0, 0));
  EXPECT_EQ(up.at(0, 223, 223), v.at(0, 63, 63));
  for (auto m : up.roi_mask) ASSERT_LE(m, 1);
  EXPECT_GT(std::count(up.roi_mask.begin(), up.roi_mask.end(), 1), std::count(v.roi_mask.begin(), v.roi_mask.end(), 1));
  EXPECT_EQ(resize_volume(v, 64).data, v.data);
}
