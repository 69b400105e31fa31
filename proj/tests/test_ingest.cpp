#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "filtfpca/export.hpp"
#include "filtfpca/ingest.hpp"

using namespace filtfpca;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("filtfpca_ingest_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

RawRecording sine_recording(const std::string& id, double hz, double fs, int samples,
                            double amplitude = 1.0) {
  RawRecording rec;
  rec.channel_id = id;
  rec.sampling_rate = fs;
  rec.samples.resize(samples);
  for (int i = 0; i < samples; ++i) {
    rec.samples[i] = amplitude * std::sin(2.0 * M_PI * hz * i / fs);
  }
  return rec;
}

}  // namespace

TEST_CASE("epoch segmentation") {
  RawRecording rec;
  rec.channel_id = "ch";
  rec.sampling_rate = 1000.0;
  rec.samples = Eigen::VectorXd::LinSpaced(5000, 0, 4999);
  const FunctionGroup five = segment_epochs(rec, 1000);
  CHECK(five.size() == 5);
  CHECK(five.grid.size == 1000);

  rec.samples = Eigen::VectorXd::LinSpaced(5300, 0, 5299);
  const FunctionGroup floored = segment_epochs(rec, 1000);
  CHECK(floored.size() == 5);

  // Epoch k holds samples [k*L, (k+1)*L).
  CHECK(floored.trajectories(3, 0) == doctest::Approx(3000.0));
  CHECK(floored.trajectories(3, 999) == doctest::Approx(3999.0));

  rec.samples = Eigen::VectorXd::Zero(999);
  CHECK_THROWS_AS(segment_epochs(rec, 1000), IngestError);
}

TEST_CASE("low-pass filter") {
  const double fs = 1000.0;
  const Grid grid(1000);

  // Constant signals pass through.
  const GridFunction constant(grid, Eigen::VectorXd::Constant(1000, 3.25));
  const GridFunction kept = lowpass_filter(constant, 50.0, fs);
  CHECK((kept.values - constant.values).cwiseAbs().maxCoeff() < 1e-10);

  // A 10 Hz tone survives a 50 Hz cutoff untouched.
  const RawRecording ten = sine_recording("t", 10.0, fs, 1000);
  const GridFunction low(grid, ten.samples);
  const GridFunction passed = lowpass_filter(low, 50.0, fs);
  CHECK((passed.values - low.values).cwiseAbs().maxCoeff() < 1e-8);

  // A 60 Hz tone is annihilated.
  const RawRecording sixty = sine_recording("s", 60.0, fs, 1000);
  const GridFunction high(grid, sixty.samples);
  const GridFunction blocked = lowpass_filter(high, 50.0, fs);
  CHECK(blocked.values.cwiseAbs().maxCoeff() < 1e-8);

  // Cutoff at or above Nyquist is rejected.
  CHECK_THROWS_AS(lowpass_filter(low, 500.0, fs), ConfigError);
  CHECK_THROWS_AS(lowpass_filter(low, 501.0, fs), ConfigError);

  // The DC bin can be dropped on request.
  const GridFunction no_dc = lowpass_filter(constant, 50.0, fs, true);
  CHECK(no_dc.values.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("low-pass filter is an orthogonal projection") {
  std::mt19937 rng(3);
  std::normal_distribution<double> normal;
  const Grid grid(128);
  Eigen::VectorXd noise(128);
  for (int i = 0; i < 128; ++i) noise[i] = normal(rng);
  const GridFunction f(grid, noise);
  const double fs = 128.0;
  const GridFunction once = lowpass_filter(f, 20.0, fs);
  const GridFunction twice = lowpass_filter(once, 20.0, fs);
  CHECK((twice.values - once.values).cwiseAbs().maxCoeff() < 1e-10);

  // Energy at retained frequencies is preserved: the filtered signal's
  // energy equals the retained-bin energy of the original spectrum.
  const int k_max = static_cast<int>(std::floor(20.0 * 128 / fs));
  double kept_energy = 128.0 * std::pow(f.values.mean(), 2.0);
  for (int k = 1; k <= k_max; ++k) {
    double a = 0.0;
    double b = 0.0;
    for (int i = 0; i < 128; ++i) {
      a += f.values[i] * std::cos(2.0 * M_PI * k * i / 128.0);
      b += f.values[i] * std::sin(2.0 * M_PI * k * i / 128.0);
    }
    kept_energy += (a * a + b * b) * 2.0 / 128.0;
  }
  CHECK(once.values.squaredNorm() == doctest::Approx(kept_energy).epsilon(1e-8));
}

TEST_CASE("signed square root") {
  const Grid g(3);
  const GridFunction f(g, (Eigen::VectorXd(3) << 4.0, -4.0, 0.0).finished());
  const GridFunction out = signed_sqrt_transform(f);
  CHECK(out.values[0] == doctest::Approx(2.0));
  CHECK(out.values[1] == doctest::Approx(-2.0));
  CHECK(out.values[2] == 0.0);

  // Bijection: x |x| undoes it.
  std::mt19937 rng(5);
  std::normal_distribution<double> normal;
  Eigen::VectorXd v(3);
  for (int i = 0; i < 3; ++i) v[i] = 10.0 * normal(rng);
  const GridFunction roundtrip = signed_sqrt_transform(GridFunction(g, v));
  for (int i = 0; i < 3; ++i) {
    CHECK(roundtrip.values[i] * std::abs(roundtrip.values[i]) ==
          doctest::Approx(v[i]).epsilon(1e-10));
  }
  // Monotone.
  CHECK(signed_sqrt_transform(GridFunction(g, (Eigen::VectorXd(3) << -9, 0, 9).finished()))
            .values.isApprox((Eigen::VectorXd(3) << -3, 0, 3).finished()));
}

TEST_CASE("outlier removal by the IQR fence") {
  // Constant epochs have L2 norm equal to their level: norms
  // {0.9, 1.0, 1.05, 1.1, 10} give Q1 = 1.0, Q3 = 1.1, fence
  // [0.85, 1.25]; only the level-10 epoch goes.
  const Grid g(4);
  Eigen::MatrixXd rows(5, 4);
  rows.row(0).setConstant(0.9);
  rows.row(1).setConstant(1.0);
  rows.row(2).setConstant(1.05);
  rows.row(3).setConstant(10.0);
  rows.row(4).setConstant(1.1);
  const auto [kept, removed] = remove_outliers(FunctionGroup("x", g, rows));
  CHECK(removed == std::vector<int>{3});
  CHECK(kept.size() == 4);
  CHECK(kept.trajectories(3, 0) == doctest::Approx(1.1));  // order preserved

  // Identical epochs: IQR collapses, nothing is removed.
  Eigen::MatrixXd same = Eigen::MatrixXd::Constant(6, 4, 2.0);
  const auto [all_kept, none] = remove_outliers(FunctionGroup("y", g, same));
  CHECK(none.empty());
  CHECK(all_kept.size() == 6);

  // Four close distinct epochs inside the fence all survive.
  Eigen::MatrixXd close(4, 4);
  close.row(0).setConstant(1.00);
  close.row(1).setConstant(1.01);
  close.row(2).setConstant(1.02);
  close.row(3).setConstant(1.03);
  const auto [survivors, gone] = remove_outliers(FunctionGroup("z", g, close));
  CHECK(gone.empty());
  CHECK(survivors.size() == 4);

  Eigen::MatrixXd too_few = Eigen::MatrixXd::Constant(3, 4, 1.0);
  CHECK_THROWS_AS(remove_outliers(FunctionGroup("w", g, too_few)), IngestError);
}

TEST_CASE("outlier removal never touches epochs strictly inside the fence") {
  std::mt19937 rng(7);
  std::normal_distribution<double> normal;
  const Grid g(6);
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 4 + static_cast<int>(rng() % 8);
    Eigen::MatrixXd rows(n, 6);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < 6; ++j) rows(i, j) = normal(rng);
    const FunctionGroup group("r", g, rows);
    std::vector<double> norms(n);
    for (int i = 0; i < n; ++i) {
      norms[i] = std::sqrt(rows.row(i).squaredNorm() * g.dt());
    }
    std::vector<double> sorted = norms;
    std::sort(sorted.begin(), sorted.end());
    auto quantile = [&](double p) {
      const double pos = p * (n - 1);
      const int lo = static_cast<int>(pos);
      return lo + 1 < n ? sorted[lo] + (pos - lo) * (sorted[lo + 1] - sorted[lo])
                        : sorted.back();
    };
    const double q1 = quantile(0.25);
    const double q3 = quantile(0.75);
    const double lo = q1 - 1.5 * (q3 - q1);
    const double hi = q3 + 1.5 * (q3 - q1);
    const auto [kept, removed] = remove_outliers(group);
    for (int i : removed) {
      CHECK((norms[i] < lo || norms[i] > hi));
    }
    CHECK(kept.size() + static_cast<int>(removed.size()) == n);
  }
}

TEST_CASE("preprocess pipeline") {
  const double fs = 200.0;
  std::vector<RawRecording> recs = {sine_recording("a", 5.0, fs, 1000, 2.0),
                                    sine_recording("b", 80.0, fs, 1000, 2.0)};
  PreprocessConfig config;
  config.epoch_length = 200;
  config.lowpass_hz = 20.0;
  config.sqrt_transform = true;
  config.outlier_removal = true;
  const PreprocessResult result = preprocess(recs, config);
  REQUIRE(result.groups.size() == 2);
  CHECK(result.groups[0].size() == 5);
  // The 80 Hz channel is annihilated by the 20 Hz cutoff.
  CHECK(result.groups[1].trajectories.cwiseAbs().maxCoeff() < 1e-4);

  // An injected huge epoch is reported in the removal ledger.
  RawRecording spiky = sine_recording("c", 5.0, fs, 1000, 1.0);
  for (int i = 400; i < 600; ++i) spiky.samples[i] *= 60.0;  // epoch 2
  const PreprocessResult spiked = preprocess({spiky}, config);
  CHECK(spiked.removed.at("c") == std::vector<int>{2});
  CHECK(spiked.groups[0].size() == 4);

  PreprocessConfig bad = config;
  bad.lowpass_hz = 100.0;
  CHECK_THROWS_AS(preprocess(recs, bad), ConfigError);
}

TEST_CASE("thread cap does not change preprocessing output") {
  std::vector<RawRecording> recs = {sine_recording("a", 3.0, 100.0, 1200, 2.0)};
  PreprocessConfig config;
  config.epoch_length = 100;
  config.lowpass_hz = 10.0;

  ::setenv("FILTRA_THREADS", "1", 1);
  const PreprocessResult serial = preprocess(recs, config);
  ::setenv("FILTRA_THREADS", "4", 1);
  const PreprocessResult parallel = preprocess(recs, config);
  ::unsetenv("FILTRA_THREADS");
  CHECK((serial.groups[0].trajectories - parallel.groups[0].trajectories).norm() == 0.0);
}

TEST_CASE("long csv round trip") {
  TempDir tmp;
  std::mt19937 rng(11);
  std::normal_distribution<double> normal;
  const Grid g(7);
  std::vector<FunctionGroup> groups;
  for (int v = 0; v < 3; ++v) {
    Eigen::MatrixXd rows(4 + v, 7);
    for (int i = 0; i < rows.rows(); ++i)
      for (int j = 0; j < 7; ++j) rows(i, j) = normal(rng) * std::pow(10.0, v - 1);
    groups.emplace_back("tet" + std::to_string(v), g, rows);
  }
  const std::string path = tmp.file("data.csv");
  write_long_csv(groups, path);
  const std::vector<FunctionGroup> back = load_long_csv(path);
  REQUIRE(back.size() == 3);
  for (int v = 0; v < 3; ++v) {
    CHECK(back[v].id == groups[v].id);
    CHECK((back[v].trajectories - groups[v].trajectories).norm() == 0.0);  // bit-exact
  }

  // Writing the loaded data reproduces the file byte for byte.
  const std::string path2 = tmp.file("data2.csv");
  write_long_csv(back, path2);
  CHECK(read_text_file(path) == read_text_file(path2));
}

TEST_CASE("long csv error paths") {
  TempDir tmp;

  const std::string empty = tmp.file("empty.csv");
  write_text_file(empty, "");
  CHECK_THROWS_AS(load_long_csv(empty), ParseError);

  const std::string header_only = tmp.file("header.csv");
  write_text_file(header_only, "group_id,epoch_id,t_index,value\n");
  CHECK_THROWS_AS(load_long_csv(header_only), ParseError);

  // Two groups with different grid sizes are rejected, naming both.
  const std::string mixed = tmp.file("mixed.csv");
  write_text_file(mixed,
                  "group_id,epoch_id,t_index,value\n"
                  "a,0,0,1\na,0,1,2\n"
                  "b,0,0,1\nb,0,1,2\nb,0,2,3\n");
  try {
    load_long_csv(mixed);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("'a'") != std::string::npos);
    CHECK(msg.find("'b'") != std::string::npos);
  }

  // Ragged trajectories within a group carry the offending line number.
  const std::string ragged = tmp.file("ragged.csv");
  write_text_file(ragged,
                  "group_id,epoch_id,t_index,value\n"
                  "a,0,0,1\na,0,1,2\n"
                  "a,1,0,3\n"
                  "a,2,0,4\na,2,1,5\n");
  try {
    load_long_csv(ragged);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line == 5);
  }

  const std::string garbage = tmp.file("garbage.csv");
  write_text_file(garbage,
                  "group_id,epoch_id,t_index,value\n"
                  "a,0,0,1\na,0,1,oops\n");
  try {
    load_long_csv(garbage);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line == 3);
  }

  // Out-of-order rows violate the sorted contract.
  const std::string unsorted = tmp.file("unsorted.csv");
  write_text_file(unsorted,
                  "group_id,epoch_id,t_index,value\n"
                  "a,0,1,1\na,0,0,2\n");
  CHECK_THROWS_AS(load_long_csv(unsorted), ParseError);

  // Non-contiguous group blocks are rejected.
  const std::string split = tmp.file("split.csv");
  write_text_file(split,
                  "group_id,epoch_id,t_index,value\n"
                  "a,0,0,1\na,0,1,2\n"
                  "b,0,0,1\nb,0,1,2\n"
                  "a,1,0,3\na,1,1,4\n");
  CHECK_THROWS_AS(load_long_csv(split), ParseError);

  CHECK_THROWS_AS(load_long_csv(tmp.file("missing.csv")), IoError);
}

TEST_CASE("raw csv round trip") {
  TempDir tmp;
  std::vector<RawRecording> recs = {sine_recording("ch1", 3.0, 100.0, 250),
                                    sine_recording("ch2", 7.0, 100.0, 250)};
  const std::string path = tmp.file("raw.csv");
  write_raw_csv(recs, path);
  const std::vector<RawRecording> back = load_raw_csv(path, 100.0);
  REQUIRE(back.size() == 2);
  CHECK(back[0].channel_id == "ch1");
  CHECK(back[1].sampling_rate == 100.0);
  CHECK((back[0].samples - recs[0].samples).norm() == 0.0);
  CHECK_THROWS_AS(load_raw_csv(path, 0.0), ConfigError);
}
