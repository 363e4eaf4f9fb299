#include <doctest.h>

#include <filesystem>
#include <random>

#include "reference.hpp"
#include "spo2/io_util.hpp"
#include "spo2/roi.hpp"
#include "test_util.hpp"

using namespace spo2;
using doctest::Approx;

namespace {

std::vector<std::uint8_t> solid_frame(int w, int h, std::uint8_t r,
                                      std::uint8_t g, std::uint8_t b) {
  std::vector<std::uint8_t> f(static_cast<std::size_t>(w) * h * 3);
  for (std::size_t i = 0; i < f.size(); i += 3) {
    f[i] = r;
    f[i + 1] = g;
    f[i + 2] = b;
  }
  return f;
}

void fill_rect(std::vector<std::uint8_t>& frame, int w, const roi::Rect& r,
               std::uint8_t red, std::uint8_t green, std::uint8_t blue) {
  for (int y = r.y; y < r.y + r.h; ++y)
    for (int x = r.x; x < r.x + r.w; ++x) {
      const std::size_t i = (static_cast<std::size_t>(y) * w + x) * 3;
      frame[i] = red;
      frame[i + 1] = green;
      frame[i + 2] = blue;
    }
}

constexpr std::uint8_t kSkinR = 190, kSkinG = 120, kSkinB = 100;

}  // namespace

TEST_SUITE("roi") {

TEST_CASE("gray pixels map to Cr of exactly 128") {
  for (int v = 0; v < 256; v += 17) {
    const auto frame = solid_frame(2, 2, static_cast<std::uint8_t>(v),
                                   static_cast<std::uint8_t>(v),
                                   static_cast<std::uint8_t>(v));
    for (double cr : roi::rgb_to_cr(frame, 2, 2)) CHECK(cr == 128.0);
  }
}

TEST_CASE("Cr of pure red clamps to 255 and pure blue lands near 107.27") {
  const auto red = roi::rgb_to_cr(solid_frame(1, 1, 255, 0, 0), 1, 1);
  CHECK(red[0] == 255.0);  // 255.5 clamped
  const auto blue = roi::rgb_to_cr(solid_frame(1, 1, 0, 0, 255), 1, 1);
  CHECK(blue[0] == Approx(107.26544).epsilon(1e-9));
}

TEST_CASE("otsu two-point histogram resolves ties to the smallest threshold") {
  std::array<std::uint64_t, 256> h{};
  h[0] = 50;
  h[255] = 50;
  CHECK(roi::otsu_threshold(h) == 0);
}

TEST_CASE("otsu equals the brute-force scan on a two-mass histogram") {
  std::array<std::uint64_t, 256> h{};
  h[40] = 10;
  h[200] = 20;
  CHECK(roi::otsu_threshold(h) == reference::otsu_threshold(h));
}

TEST_CASE("otsu rejects single-valued histograms") {
  std::array<std::uint64_t, 256> h{};
  h[7] = 1234;
  CHECK_THROWS_WITH_AS(roi::otsu_threshold(h),
                       doctest::Contains("degenerate-histogram"), Error);
  std::array<std::uint64_t, 256> empty{};
  CHECK_THROWS_AS(roi::otsu_threshold(empty), Error);
}

TEST_CASE("otsu equals the brute-force scan on random histograms") {
  std::mt19937_64 rng(41);
  std::uniform_int_distribution<int> bins(2, 255);
  std::uniform_int_distribution<std::uint64_t> mass(0, 1000);
  for (int trial = 0; trial < 1000; ++trial) {
    std::array<std::uint64_t, 256> h{};
    const int k = bins(rng);
    for (int i = 0; i < k; ++i) h[rng() % 256] += mass(rng);
    int distinct = 0;
    for (auto v : h) distinct += v > 0;
    if (distinct < 2) continue;
    CHECK(roi::otsu_threshold(h) == reference::otsu_threshold(h));
  }
}

TEST_CASE("skin mask recovers a skin-colored rectangle on black background") {
  const int w = 64, h = 48;
  auto frame = solid_frame(w, h, 0, 0, 0);
  const roi::Rect skin{16, 12, 32, 24};
  fill_rect(frame, w, skin, kSkinR, kSkinG, kSkinB);
  roi::RoiConfig cfg;
  const auto mask = roi::skin_mask(frame, w, h, cfg);

  // interior pixels (inset by the morphology radius) are all skin
  for (int y = skin.y + 3; y < skin.y + skin.h - 3; ++y)
    for (int x = skin.x + 3; x < skin.x + skin.w - 3; ++x)
      CHECK(mask.at(x, y));
  // well outside the rectangle nothing is skin
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (x < skin.x - 3 || x >= skin.x + skin.w + 3 || y < skin.y - 3 ||
          y >= skin.y + skin.h + 3)
        CHECK(!mask.at(x, y));
  const double rect_fraction =
      static_cast<double>(skin.w * skin.h) / (static_cast<double>(w) * h);
  CHECK(mask.coverage == Approx(rect_fraction).epsilon(0.15));
}

TEST_CASE("all-black frames have no usable skin contrast") {
  const auto frame = solid_frame(32, 32, 0, 0, 0);
  roi::RoiConfig cfg;
  CHECK_THROWS_WITH_AS(roi::skin_mask(frame, 32, 32, cfg),
                       doctest::Contains("insufficient-skin"), Error);
}

TEST_CASE("median filtering removes isolated salt pixels") {
  const int w = 64, h = 48;
  auto clean = solid_frame(w, h, 0, 0, 0);
  const roi::Rect skin{16, 12, 32, 24};
  fill_rect(clean, w, skin, kSkinR, kSkinG, kSkinB);
  auto noisy = clean;
  // a few impulse pixels (~0.1%) outside the hand region
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> ux(0, w - 1), uy(0, h - 1);
  int injected = 0;
  while (injected < 3) {
    const int x = ux(rng), y = uy(rng);
    if (x >= skin.x - 2 && x < skin.x + skin.w + 2 && y >= skin.y - 2 &&
        y < skin.y + skin.h + 2)
      continue;
    fill_rect(noisy, w, {x, y, 1, 1}, kSkinR, kSkinG, kSkinB);
    ++injected;
  }
  roi::RoiConfig cfg;
  const auto m_clean = roi::skin_mask(clean, w, h, cfg);
  const auto m_noisy = roi::skin_mask(noisy, w, h, cfg);
  CHECK(std::abs(m_clean.coverage - m_noisy.coverage) <= 1e-3);
}

TEST_CASE("pixels outside the bounding rectangle never enter the mask") {
  const int w = 64, h = 48;
  const roi::Rect bound{8, 8, 40, 30};
  auto frame = solid_frame(w, h, 0, 0, 0);
  fill_rect(frame, w, {12, 12, 20, 16}, kSkinR, kSkinG, kSkinB);
  roi::RoiConfig cfg;
  cfg.rect = bound;
  const auto base = roi::skin_mask(frame, w, h, cfg);
  // garbage outside the rectangle must not change anything
  auto vandalized = frame;
  fill_rect(vandalized, w, {52, 2, 10, 40}, 255, 255, 255);
  fill_rect(vandalized, w, {0, 40, 6, 8}, kSkinR, kSkinG, kSkinB);
  const auto modified = roi::skin_mask(vandalized, w, h, cfg);
  CHECK(base.mask == modified.mask);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (x < bound.x || x >= bound.x + bound.w || y < bound.y ||
          y >= bound.y + bound.h)
        CHECK(!modified.at(x, y));
}

TEST_CASE("spatial average of uniform and two-tone frames") {
  FrameSequence seq;
  seq.width = 8;
  seq.height = 4;
  seq.fps = 30.0;
  seq.frames.push_back(solid_frame(8, 4, 10, 20, 30));
  roi::SkinMask mask;
  mask.width = 8;
  mask.height = 4;
  mask.mask.assign(32, 1);
  mask.coverage = 1.0;
  auto trace = roi::spatial_average(seq, {mask});
  CHECK(trace.r[0] == Approx(10.0));
  CHECK(trace.g[0] == Approx(20.0));
  CHECK(trace.b[0] == Approx(30.0));

  auto frame = solid_frame(8, 4, 0, 0, 0);
  fill_rect(frame, 8, {0, 0, 4, 4}, 100, 100, 100);
  seq.frames[0] = frame;
  trace = roi::spatial_average(seq, {mask});
  CHECK(trace.r[0] == Approx(50.0));
  CHECK(trace.g[0] == Approx(50.0));
  CHECK(trace.b[0] == Approx(50.0));
}

TEST_CASE("spatial average matches the naive double loop on random frames") {
  std::mt19937_64 rng(9);
  FrameSequence seq;
  seq.width = 37;
  seq.height = 23;
  seq.fps = 30.0;
  std::vector<roi::SkinMask> masks;
  for (int f = 0; f < 4; ++f) {
    std::vector<std::uint8_t> frame(static_cast<std::size_t>(37) * 23 * 3);
    for (auto& v : frame) v = static_cast<std::uint8_t>(rng() % 256);
    seq.frames.push_back(std::move(frame));
    roi::SkinMask m;
    m.width = 37;
    m.height = 23;
    m.mask.resize(37 * 23);
    for (auto& v : m.mask) v = (rng() % 3) ? 1 : 0;
    m.mask[0] = 1;  // never empty
    masks.push_back(std::move(m));
  }
  const auto got = roi::spatial_average(seq, masks);
  const auto want = reference::spatial_average(seq, masks);
  for (std::size_t i = 0; i < got.size(); ++i) {
    CHECK(near(got.r[i], want.r[i], 1e-9, 1e-9));
    CHECK(near(got.g[i], want.g[i], 1e-9, 1e-9));
    CHECK(near(got.b[i], want.b[i], 1e-9, 1e-9));
  }
}

TEST_CASE("spatial average scales linearly with frame intensity") {
  FrameSequence seq;
  seq.width = 16;
  seq.height = 8;
  seq.fps = 30.0;
  std::mt19937_64 rng(13);
  std::vector<std::uint8_t> frame(static_cast<std::size_t>(16) * 8 * 3);
  for (auto& v : frame) v = static_cast<std::uint8_t>(rng() % 128);
  auto doubled = frame;
  for (auto& v : doubled) v = static_cast<std::uint8_t>(2 * v);
  seq.frames = {frame, doubled};
  roi::SkinMask mask;
  mask.width = 16;
  mask.height = 8;
  mask.mask.assign(16 * 8, 1);
  const auto trace = roi::spatial_average(seq, {mask, mask});
  CHECK(trace.r[1] == Approx(2.0 * trace.r[0]));
  CHECK(trace.g[1] == Approx(2.0 * trace.g[0]));
  CHECK(trace.b[1] == Approx(2.0 * trace.b[0]));
}

TEST_CASE("empty masks report the failing frame") {
  FrameSequence seq;
  seq.width = 4;
  seq.height = 4;
  seq.fps = 30.0;
  seq.frames = {solid_frame(4, 4, 1, 2, 3), solid_frame(4, 4, 1, 2, 3)};
  roi::SkinMask ok;
  ok.width = ok.height = 4;
  ok.mask.assign(16, 1);
  roi::SkinMask empty = ok;
  empty.mask.assign(16, 0);
  CHECK_THROWS_WITH_AS(roi::spatial_average(seq, {ok, empty}),
                       doctest::Contains("frame 1"), Error);
}

TEST_CASE("static-mask extraction reuses frame zero's mask") {
  const int w = 48, h = 32;
  auto f0 = solid_frame(w, h, 0, 0, 0);
  fill_rect(f0, w, {8, 8, 24, 16}, kSkinR, kSkinG, kSkinB);
  auto f1 = solid_frame(w, h, 0, 0, 0);  // would fail skin detection alone
  FrameSequence seq;
  seq.width = w;
  seq.height = h;
  seq.fps = 30.0;
  seq.frames = {f0, f1};
  roi::RoiConfig cfg;
  cfg.static_mask = true;
  const auto trace = roi::extract_trace(seq, cfg);
  CHECK(trace.r[0] == Approx(kSkinR).epsilon(0.05));
  CHECK(trace.r[1] == Approx(0.0).epsilon(0.05).scale(1.0));
}

TEST_CASE("mask PGM export writes the expected header and payload") {
  roi::SkinMask m;
  m.width = 3;
  m.height = 2;
  m.mask = {1, 0, 1, 0, 1, 0};
  const auto path = std::filesystem::temp_directory_path() / "spo2_mask.pgm";
  roi::write_mask_pgm(m, path.string());
  const auto data = read_file(path.string());
  CHECK(data.substr(0, 3) == "P5\n");
  CHECK(data.find("3 2\n255\n") != std::string::npos);
  CHECK(static_cast<unsigned char>(data[data.size() - 6]) == 255);
  std::filesystem::remove(path);
}

}  // TEST_SUITE
