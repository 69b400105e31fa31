#include "filtfpca/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

namespace filtfpca {

void PreprocessConfig::validate(double sampling_rate) const {
  if (epoch_length < 2) {
    throw ConfigError("epoch_length must be at least 2 samples");
  }
  if (sampling_rate <= 0.0) {
    throw ConfigError("sampling rate must be positive");
  }
  if (lowpass_hz && (*lowpass_hz <= 0.0 || *lowpass_hz >= sampling_rate / 2.0)) {
    throw ConfigError("low-pass cutoff must lie in (0, fs/2)");
  }
}

FunctionGroup segment_epochs(const RawRecording& rec, int epoch_length) {
  if (epoch_length < 2) {
    throw ConfigError("epoch_length must be at least 2 samples");
  }
  const long total = static_cast<long>(rec.samples.size());
  const long epochs = total / epoch_length;
  if (epochs < 1) {
    throw IngestError("channel '" + rec.channel_id + "' has " + std::to_string(total) +
                      " samples, epoch needs " + std::to_string(epoch_length));
  }
  Eigen::MatrixXd rows(epochs, epoch_length);
  for (long k = 0; k < epochs; ++k) {
    rows.row(k) = rec.samples.segment(k * epoch_length, epoch_length).transpose();
  }
  return FunctionGroup(rec.channel_id, Grid(epoch_length), std::move(rows));
}

GridFunction lowpass_filter(const GridFunction& f, double cutoff_hz, double sampling_rate,
                            bool drop_dc) {
  if (sampling_rate <= 0.0) {
    throw ConfigError("sampling rate must be positive");
  }
  if (cutoff_hz <= 0.0 || cutoff_hz >= sampling_rate / 2.0) {
    throw ConfigError("low-pass cutoff must lie in (0, fs/2)");
  }
  const int t = f.grid.size;
  // Bin k sits at k*fs/T Hz; cutoff < fs/2 keeps k strictly below T/2,
  // so the Nyquist bin never needs special handling.
  const int k_max = static_cast<int>(std::floor(cutoff_hz * t / sampling_rate));

  Eigen::VectorXd out = Eigen::VectorXd::Zero(t);
  if (!drop_dc) {
    out.setConstant(f.values.mean());
  }
  // cos/sin of 2 pi j / T once; the angle for (k,i) is index k*i mod T.
  Eigen::VectorXd cos_tab(t);
  Eigen::VectorXd sin_tab(t);
  for (int j = 0; j < t; ++j) {
    const double arg = 2.0 * M_PI * j / t;
    cos_tab[j] = std::cos(arg);
    sin_tab[j] = std::sin(arg);
  }
  for (int k = 1; k <= k_max; ++k) {
    double a = 0.0;
    double b = 0.0;
    for (int i = 0, j = 0; i < t; ++i) {
      a += f.values[i] * cos_tab[j];
      b += f.values[i] * sin_tab[j];
      j += k;
      if (j >= t) j -= t;
    }
    a *= 2.0 / t;
    b *= 2.0 / t;
    for (int i = 0, j = 0; i < t; ++i) {
      out[i] += a * cos_tab[j] + b * sin_tab[j];
      j += k;
      if (j >= t) j -= t;
    }
  }
  return GridFunction(f.grid, std::move(out));
}

GridFunction signed_sqrt_transform(const GridFunction& f) {
  Eigen::VectorXd out(f.values.size());
  for (int i = 0; i < f.values.size(); ++i) {
    const double x = f.values[i];
    out[i] = x < 0.0 ? -std::sqrt(-x) : std::sqrt(x);
  }
  return GridFunction(f.grid, std::move(out));
}

namespace {

double interpolated_quantile(const std::vector<double>& sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const double frac = pos - static_cast<double>(lo);
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace

std::pair<FunctionGroup, std::vector<int>> remove_outliers(const FunctionGroup& g) {
  const int n = g.size();
  if (n < 4) {
    throw IngestError("outlier removal needs at least 4 epochs, group '" + g.id + "' has " +
                      std::to_string(n));
  }
  std::vector<double> norms(n);
  const double dt = g.grid.dt();
  for (int k = 0; k < n; ++k) {
    norms[k] = std::sqrt(g.trajectories.row(k).squaredNorm() * dt);
  }
  std::vector<double> sorted = norms;
  std::sort(sorted.begin(), sorted.end());
  const double q1 = interpolated_quantile(sorted, 0.25);
  const double q3 = interpolated_quantile(sorted, 0.75);
  const double iqr = q3 - q1;
  const double lo = q1 - 1.5 * iqr;
  const double hi = q3 + 1.5 * iqr;

  std::vector<int> removed;
  std::vector<int> kept;
  for (int k = 0; k < n; ++k) {
    if (norms[k] < lo || norms[k] > hi) {
      removed.push_back(k);
    } else {
      kept.push_back(k);
    }
  }
  if (kept.empty()) {
    throw IngestError("every epoch of group '" + g.id + "' fell outside the IQR fence");
  }
  Eigen::MatrixXd rows(kept.size(), g.grid.size);
  for (std::size_t k = 0; k < kept.size(); ++k) {
    rows.row(k) = g.trajectories.row(kept[k]);
  }
  return {FunctionGroup(g.id, g.grid, std::move(rows)), removed};
}

namespace {

int thread_cap() {
  int cap = static_cast<int>(std::thread::hardware_concurrency());
  if (cap < 1) cap = 1;
  if (const char* env = std::getenv("FILTRA_THREADS")) {
    const int requested = std::atoi(env);
    if (requested >= 1) cap = std::min(cap, requested);
  }
  return cap;
}

// Deterministic epoch-parallel map: each worker owns a contiguous block
// of rows, so the output equals the sequential run.
template <typename Fn>
void for_each_row(int rows, Fn&& fn) {
  const int workers = std::min(rows, thread_cap());
  if (workers <= 1) {
    for (int k = 0; k < rows; ++k) fn(k);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const int chunk = (rows + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const int begin = w * chunk;
    const int end = std::min(rows, begin + chunk);
    pool.emplace_back([&fn, begin, end] {
      for (int k = begin; k < end; ++k) fn(k);
    });
  }
  for (std::thread& th : pool) th.join();
}

}  // namespace

PreprocessResult preprocess(const std::vector<RawRecording>& recordings,
                            const PreprocessConfig& config) {
  PreprocessResult result;
  for (const RawRecording& rec : recordings) {
    config.validate(rec.sampling_rate);
    FunctionGroup epochs = segment_epochs(rec, config.epoch_length);
    for_each_row(epochs.size(), [&](int k) {
      GridFunction f(epochs.grid, epochs.trajectories.row(k).transpose());
      if (config.lowpass_hz) {
        f = lowpass_filter(f, *config.lowpass_hz, rec.sampling_rate, config.drop_dc);
      }
      if (config.sqrt_transform) {
        f = signed_sqrt_transform(f);
      }
      epochs.trajectories.row(k) = f.values.transpose();
    });
    std::vector<int> removed;
    if (config.outlier_removal) {
      auto [kept, gone] = remove_outliers(epochs);
      epochs = std::move(kept);
      removed = std::move(gone);
    }
    result.removed[rec.channel_id] = std::move(removed);
    result.groups.push_back(std::move(epochs));
  }
  return result;
}

namespace {

constexpr const char* kLongHeader = "group_id,epoch_id,t_index,value";
constexpr const char* kRawHeader = "channel_id,t_index,value";

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

long parse_index(const std::string& field, long line_no, const char* what) {
  long value = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size() || value < 0) {
    throw ParseError(std::string("invalid ") + what + " '" + field + "'", line_no);
  }
  return value;
}

double parse_value(const std::string& field, long line_no) {
  if (field.empty()) throw ParseError("empty value cell", line_no);
  char* end = nullptr;
  const double value = std::strtod(field.c_str(), &end);
  if (end != field.c_str() + field.size() || !std::isfinite(value)) {
    throw ParseError("non-numeric value '" + field + "'", line_no);
  }
  return value;
}

void check_id(const std::string& id) {
  if (id.empty() || id.find(',') != std::string::npos || id.find('\n') != std::string::npos) {
    throw ConfigError("invalid group id '" + id + "'");
  }
}

struct GroupBuilder {
  std::string id;
  int grid_size = -1;
  std::vector<double> values;  // row-major
  long rows = 0;
};

class LineReader {
 public:
  explicit LineReader(const std::string& path) : in_(path) {
    if (!in_) throw IoError("cannot open '" + path + "' for reading");
  }

  bool next(std::string& line) {
    if (!std::getline(in_, line)) return false;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ++line_no_;
    return true;
  }

  long line_no() const { return line_no_; }

 private:
  std::ifstream in_;
  long line_no_ = 0;
};

}  // namespace

std::vector<FunctionGroup> load_long_csv(const std::string& path) {
  LineReader reader(path);
  std::string line;
  if (!reader.next(line)) {
    throw ParseError("empty file '" + path + "'", 1);
  }
  if (line != kLongHeader) {
    throw ParseError("expected header '" + std::string(kLongHeader) + "'", 1);
  }
  std::vector<GroupBuilder> groups;
  std::set<std::string> seen;
  GroupBuilder* current = nullptr;
  long current_epoch = -1;
  long next_t = 0;

  auto close_trajectory = [&](long line_no) {
    if (!current || current_epoch < 0) return;
    if (current->grid_size < 0) {
      current->grid_size = static_cast<int>(next_t);
    } else if (next_t != current->grid_size) {
      throw ParseError("trajectory of group '" + current->id + "' has " +
                       std::to_string(next_t) + " samples, expected " +
                       std::to_string(current->grid_size), line_no);
    }
    ++current->rows;
  };

  while (reader.next(line)) {
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_fields(line);
    if (fields.size() != 4) {
      throw ParseError("expected 4 comma-separated fields", reader.line_no());
    }
    const std::string& gid = fields[0];
    const long epoch = parse_index(fields[1], reader.line_no(), "epoch_id");
    const long t = parse_index(fields[2], reader.line_no(), "t_index");
    const double value = parse_value(fields[3], reader.line_no());

    if (!current || gid != current->id) {
      close_trajectory(reader.line_no());
      if (!seen.insert(gid).second) {
        throw ParseError("rows of group '" + gid + "' are not contiguous", reader.line_no());
      }
      groups.push_back(GroupBuilder{gid, -1, {}, 0});
      current = &groups.back();
      current_epoch = -1;
    }
    if (epoch != current_epoch) {
      close_trajectory(reader.line_no());
      current_epoch = epoch;
      next_t = 0;
    }
    if (t != next_t) {
      throw ParseError("t_index " + std::to_string(t) + " out of order, expected " +
                       std::to_string(next_t), reader.line_no());
    }
    ++next_t;
    current->values.push_back(value);
  }
  close_trajectory(reader.line_no());

  if (groups.empty()) {
    throw ParseError("no data rows in '" + path + "'", reader.line_no());
  }
  for (const GroupBuilder& g : groups) {
    if (g.grid_size != groups.front().grid_size) {
      throw ParseError("groups '" + groups.front().id + "' and '" + g.id +
                       "' have different grid sizes (" +
                       std::to_string(groups.front().grid_size) + " vs " +
                       std::to_string(g.grid_size) + ")");
    }
  }
  std::vector<FunctionGroup> out;
  out.reserve(groups.size());
  for (GroupBuilder& g : groups) {
    Eigen::MatrixXd rows = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                    Eigen::RowMajor>>(
        g.values.data(), g.rows, g.grid_size);
    out.emplace_back(g.id, Grid(g.grid_size), std::move(rows));
  }
  return out;
}

void write_long_csv(const std::vector<FunctionGroup>& groups, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  std::fprintf(f, "%s\n", kLongHeader);
  for (const FunctionGroup& g : groups) {
    check_id(g.id);
    for (int n = 0; n < g.size(); ++n) {
      for (int t = 0; t < g.grid.size; ++t) {
        std::fprintf(f, "%s,%d,%d,%.17g\n", g.id.c_str(), n, t, g.trajectories(n, t));
      }
    }
  }
  if (std::fclose(f) != 0) throw IoError("failed to finish writing '" + path + "'");
}

std::vector<RawRecording> load_raw_csv(const std::string& path, double sampling_rate) {
  if (sampling_rate <= 0.0) {
    throw ConfigError("sampling rate must be positive");
  }
  LineReader reader(path);
  std::string line;
  if (!reader.next(line)) {
    throw ParseError("empty file '" + path + "'", 1);
  }
  if (line != kRawHeader) {
    throw ParseError("expected header '" + std::string(kRawHeader) + "'", 1);
  }
  std::vector<RawRecording> out;
  std::set<std::string> seen;
  std::vector<double> samples;
  std::string current_id;
  long next_t = 0;

  auto flush = [&]() {
    if (current_id.empty()) return;
    RawRecording rec;
    rec.channel_id = current_id;
    rec.sampling_rate = sampling_rate;
    rec.samples = Eigen::Map<Eigen::VectorXd>(samples.data(), samples.size());
    out.push_back(std::move(rec));
    samples.clear();
  };

  while (reader.next(line)) {
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_fields(line);
    if (fields.size() != 3) {
      throw ParseError("expected 3 comma-separated fields", reader.line_no());
    }
    const std::string& cid = fields[0];
    const long t = parse_index(fields[1], reader.line_no(), "t_index");
    const double value = parse_value(fields[2], reader.line_no());
    if (cid != current_id) {
      flush();
      if (!seen.insert(cid).second) {
        throw ParseError("rows of channel '" + cid + "' are not contiguous", reader.line_no());
      }
      current_id = cid;
      next_t = 0;
    }
    if (t != next_t) {
      throw ParseError("t_index " + std::to_string(t) + " out of order, expected " +
                       std::to_string(next_t), reader.line_no());
    }
    ++next_t;
    samples.push_back(value);
  }
  flush();
  if (out.empty()) {
    throw ParseError("no data rows in '" + path + "'", reader.line_no());
  }
  return out;
}

void write_raw_csv(const std::vector<RawRecording>& recordings, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  std::fprintf(f, "%s\n", kRawHeader);
  for (const RawRecording& rec : recordings) {
    check_id(rec.channel_id);
    for (long t = 0; t < static_cast<long>(rec.samples.size()); ++t) {
      std::fprintf(f, "%s,%ld,%.17g\n", rec.channel_id.c_str(), t, rec.samples[t]);
    }
  }
  if (std::fclose(f) != 0) throw IoError("failed to finish writing '" + path + "'");
}

}  // namespace filtfpca
