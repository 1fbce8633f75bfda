#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "stsc/dataset.hpp"
#include "stsc/error.hpp"
#include "stsc/io.hpp"
#include "stsc/synthetic.hpp"

using namespace stsc;

namespace {

template <class F>
Errc error_code(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected stsc::Error";
  return Errc::io;
}

double ramp(std::size_t slot) { return 30.0 + 0.1 * static_cast<double>(slot); }

struct Field {
  SpeedMatrix matrix;
  SensorNetwork network;
};

// Every sensor and every day carries the same ramp, so all lag days agree.
Field ramp_field(std::size_t sensors, std::size_t days) {
  SynthConfig cfg;
  cfg.sensor_count = sensors;
  cfg.day_count = days;
  const auto synth = generate_synthetic(cfg);
  Field f{synth.truth, synth.network};
  for (std::size_t d = 0; d < days; ++d)
    for (std::size_t s = 0; s < f.matrix.slots_per_day(); ++s)
      for (std::size_t k = 0; k < sensors; ++k) f.matrix.at(f.matrix.row(d, s), k) = ramp(s);
  return f;
}

Field synthetic_field(std::size_t sensors, std::size_t days, std::uint64_t seed = 42) {
  SynthConfig cfg;
  cfg.sensor_count = sensors;
  cfg.day_count = days;
  cfg.rng_seed = seed;
  cfg.missing_rate = 0;
  cfg.outlier_rate = 0;
  const auto synth = generate_synthetic(cfg);
  return {synth.observed, synth.network};
}

std::size_t slot_of(const SpeedMatrix& m, TimePoint t) {
  return *m.row_of(t) % m.slots_per_day();
}

}  // namespace

TEST(Normalization, Examples) {
  const NormalizationParams p{0, 70};
  EXPECT_EQ(p.normalize(35), 0.5);
  EXPECT_EQ(p.normalize(0), 0.0);
  EXPECT_EQ(p.normalize(70), 1.0);
  EXPECT_EQ(p.normalize_clamped(80), 1.0);
  EXPECT_EQ(p.normalize_clamped(-3), 0.0);
  EXPECT_EQ(error_code([] { NormalizationParams{5, 5}.validate(); }), Errc::degenerate_range);
  const std::vector<double> flat{4, 4, 4};
  EXPECT_EQ(error_code([&] { fit_normalization(flat); }), Errc::degenerate_range);
  EXPECT_EQ(error_code([] { fit_normalization({}); }), Errc::empty_input);
}

TEST(Normalization, RoundTrip) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-50, 150);
  const NormalizationParams p{3.7, 91.25};
  for (int i = 0; i < 10000; ++i) {
    const double z = u(rng);
    EXPECT_NEAR(p.denormalize(p.normalize(z)), z, 1e-12);
  }
}

TEST(AnchorRange, DefaultWindow) {
  const AnchorRange r = anchor_range({}, {});
  EXPECT_EQ(r.first, Minutes{12 * 60});
  EXPECT_EQ(r.last, Minutes{19 * 60 + 30});
  EXPECT_EQ(r.per_day(), 91u);
}

TEST(Sample, ShapesAndRampChannels) {
  const Field f = ramp_field(12, 15);
  const DatasetConfig cfg;
  const TimePoint t0 = parse_timestamp("2017-06-15 14:35");
  const Sample s = build_raw_sample(f.matrix, f.network, "S3", t0, cfg);
  EXPECT_EQ(s.x.shape(), (Shape{60, 10, 4}));
  EXPECT_EQ(s.y.shape(), (Shape{12, 1, 1}));
  EXPECT_EQ(s.info.neighbors.front(), "S3");
  const std::size_t a = slot_of(f.matrix, t0);
  for (std::size_t h = 0; h < 60; ++h) {
    // Channel 1: (t0 - 295 min ... t0].
    EXPECT_EQ(s.x.at(h, 0, 0), ramp(a + 1 + h - 60));
    // Lag channels: (t0 - 150 min ... t0 + 150 min] on the lag day.
    for (std::size_t c = 1; c < 4; ++c) EXPECT_EQ(s.x.at(h, 0, c), ramp(a + 1 + h - 30));
  }
  for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(s.y[i], ramp(a + 1 + i));

  NormalizationParams p{20, 60};
  const Sample n = build_sample(f.matrix, f.network, "S3", t0, cfg, p);
  for (std::size_t h = 0; h < 60; ++h) EXPECT_NEAR(n.x.at(h, 0, 0), p.normalize(ramp(a + 1 + h - 60)), 1e-15);
}

TEST(Sample, RepeatedDaysGiveEqualLagChannels) {
  const Field f = synthetic_field(6, 15);
  Field g = f;
  // Copy day 13 onto days 0 and 6 so lags 1, 7 and 14 of day 14 coincide.
  for (std::size_t s = 0; s < g.matrix.slots_per_day(); ++s)
    for (std::size_t k = 0; k < 6; ++k) {
      g.matrix.at(g.matrix.row(0, s), k) = f.matrix.at(f.matrix.row(13, s), k);
      g.matrix.at(g.matrix.row(7, s), k) = f.matrix.at(f.matrix.row(13, s), k);
    }
  const Sample s = build_raw_sample(g.matrix, g.network, "S2",
                                    parse_timestamp("2017-06-15 16:00"), DatasetConfig{});
  for (std::size_t h = 0; h < 60; ++h)
    for (std::size_t w = 0; w < 10; ++w) {
      EXPECT_EQ(s.x.at(h, w, 2), s.x.at(h, w, 1));
      EXPECT_EQ(s.x.at(h, w, 3), s.x.at(h, w, 1));
    }
}

TEST(Sample, ShortfallPadsWithLastNeighbour) {
  const Field f = ramp_field(5, 15);
  const Sample s = build_raw_sample(f.matrix, f.network, "S1",
                                    parse_timestamp("2017-06-15 12:00"), DatasetConfig{});
  EXPECT_TRUE(s.info.shortfall);
  ASSERT_EQ(s.info.neighbors.size(), 10u);
  for (std::size_t w = 5; w < 10; ++w) EXPECT_EQ(s.info.neighbors[w], s.info.neighbors[4]);
  for (std::size_t w = 5; w < 10; ++w)
    for (std::size_t h = 0; h < 60; ++h)
      for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(s.x.at(h, w, c), s.x.at(h, 4, c));
}

TEST(Sample, Errors) {
  const Field f = synthetic_field(5, 15);
  const DatasetConfig cfg;
  EXPECT_EQ(error_code([&] {
              build_raw_sample(f.matrix, f.network, "S1", parse_timestamp("2017-06-15 09:00"), cfg);
            }),
            Errc::range);
  try {
    build_raw_sample(f.matrix, f.network, "S1", parse_timestamp("2017-06-10 12:00"), cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::insufficient_history);
    EXPECT_NE(std::string(e.what()).find("2017-05-27"), std::string::npos) << e.what();
  }
  SpeedMatrix holes = f.matrix;
  holes.at(holes.row(14, 100), 0) = kMissing;
  EXPECT_EQ(error_code([&] {
              build_raw_sample(holes, f.network, "S1", parse_timestamp("2017-06-15 16:00"), cfg);
            }),
            Errc::insufficient_history);
}

TEST(Dataset, AnchorCountSplitAndRange) {
  const Field f = synthetic_field(5, 15);
  const DatasetSplit split = build_dataset(f.matrix, f.network, {}, DatasetConfig{});
  EXPECT_EQ(split.train.size() + split.test.size(), 91u * 5u);
  EXPECT_EQ(split.train.size(), 64u * 5u);  // round(0.7 * 91) anchors
  EXPECT_EQ(split.padded, 91u * 5u);         // 5 sensors < 10 neighbours
  TimePoint last_train{}, first_test = TimePoint::max();
  for (std::size_t i = 0; i < split.train.size(); ++i)
    last_train = std::max(last_train, split.train.info(i).anchor);
  for (std::size_t i = 0; i < split.test.size(); ++i)
    first_test = std::min(first_test, split.test.info(i).anchor);
  EXPECT_LT(last_train, first_test);
  for (const SampleSet* set : {&split.train, &split.test})
    for (std::size_t i = 0; i < set->size(); ++i) {
      for (float v : set->x_values(i)) {
        EXPECT_GE(v, 0.0f);
        EXPECT_LE(v, 1.0f);
      }
      for (double v : set->y_values(i)) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
      }
    }
  // Ordered by anchor, then target.
  EXPECT_EQ(split.train.info(0).target, "S1");
  EXPECT_EQ(split.train.info(4).target, "S5");
  EXPECT_EQ(split.train.info(5).anchor, split.train.info(0).anchor + Minutes{5});
}

TEST(Dataset, TooFewDaysIsEmpty) {
  const Field f = synthetic_field(3, 14);
  EXPECT_EQ(error_code([&] { build_dataset(f.matrix, f.network, {}, DatasetConfig{}); }),
            Errc::empty_dataset);
}

TEST(Dataset, YMatchesMatrixAndNoLeakage) {
  const Field f = synthetic_field(6, 16);
  DatasetConfig cfg;
  cfg.anchor_stride = 3;
  const DatasetSplit split = build_dataset(f.matrix, f.network, {}, cfg);
  std::vector<double> raw;
  for (std::size_t i = 0; i < split.train.size(); ++i) {
    const auto& info = split.train.info(i);
    const Sample s = build_raw_sample(f.matrix, f.network, info.target, info.anchor, cfg);
    raw.insert(raw.end(), s.x.data().begin(), s.x.data().end());
    raw.insert(raw.end(), s.y.data().begin(), s.y.data().end());
  }
  EXPECT_EQ(fit_normalization(raw), split.params);

  for (const SampleSet* set : {&split.train, &split.test})
    for (std::size_t i = 0; i < set->size(); ++i) {
      const auto& info = set->info(i);
      const std::size_t col = f.matrix.sensor_index(info.target);
      const std::size_t row = *f.matrix.row_of(info.anchor);
      for (std::size_t k = 0; k < 12; ++k) {
        const double want = f.matrix.at(row + 1 + k, col);
        const double got = split.params.denormalize(set->y_values(i)[k]);
        if (want >= split.params.min && want <= split.params.max) {
          EXPECT_NEAR(got, want, 1e-12 * std::abs(want));
        }
      }
    }

  // Rewriting every reading after the last training target must not move
  // the parameters.
  TimePoint last_train{};
  for (std::size_t i = 0; i < split.train.size(); ++i)
    last_train = std::max(last_train, split.train.info(i).anchor);
  Field g = f;
  std::size_t changed = 0;
  for (std::size_t r = *g.matrix.row_of(last_train) + 13; r < g.matrix.time_count(); ++r)
    for (std::size_t k = 0; k < 6; ++k, ++changed) g.matrix.at(r, k) = 150.0 + k;
  EXPECT_GT(changed, 100u);
  const DatasetSplit other = build_dataset(g.matrix, g.network, {}, cfg);
  ASSERT_EQ(other.train.size(), split.train.size());
  EXPECT_EQ(other.params, split.params);
}

TEST(Dataset, ThreadCountDoesNotChangeResult) {
  const Field f = synthetic_field(6, 15);
  DatasetConfig one, three;
  one.anchor_stride = three.anchor_stride = 4;
  three.threads = 3;
  const DatasetSplit a = build_dataset(f.matrix, f.network, {}, one);
  const DatasetSplit b = build_dataset(f.matrix, f.network, {}, three);
  ASSERT_EQ(a.train.size(), b.train.size());
  EXPECT_EQ(a.params, b.params);
  for (std::size_t i = 0; i < a.train.size(); ++i) {
    EXPECT_EQ(a.train.x(i), b.train.x(i));
    EXPECT_EQ(a.train.info(i), b.train.info(i));
  }
}

TEST(Dataset, ArchiveRoundTripAndCorruption) {
  const Field f = synthetic_field(4, 15);
  DatasetConfig cfg;
  cfg.anchor_stride = 10;
  const DatasetSplit split = build_dataset(f.matrix, f.network, {}, cfg);
  const auto dir = std::filesystem::temp_directory_path() / "stsc_dataset_test";
  std::filesystem::remove_all(dir);
  save_dataset(split, dir);
  const DatasetSplit back = load_dataset(dir);
  EXPECT_EQ(back.params, split.params);
  EXPECT_EQ(back.padded, split.padded);
  ASSERT_EQ(back.train.size(), split.train.size());
  ASSERT_EQ(back.test.size(), split.test.size());
  for (std::size_t i = 0; i < split.test.size(); ++i) {
    EXPECT_EQ(back.test.x(i), split.test.x(i));
    EXPECT_EQ(back.test.info(i), split.test.info(i));
    for (std::size_t k = 0; k < 12; ++k)
      EXPECT_NEAR(back.test.y_values(i)[k], split.test.y_values(i)[k], 1e-7);
  }

  const std::string bin = read_file(dir / "samples.bin");
  write_file_atomic(dir / "samples.bin", bin.substr(0, bin.size() - 5));
  EXPECT_EQ(error_code([&] { load_dataset(dir); }), Errc::truncated);
  write_file_atomic(dir / "samples.bin", bin);
  write_file_atomic(dir / "meta.json", "{not json");
  EXPECT_EQ(error_code([&] { load_dataset(dir); }), Errc::parse);
  std::filesystem::remove_all(dir);
  EXPECT_EQ(error_code([&] { load_dataset(dir); }), Errc::io);
}
