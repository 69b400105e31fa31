#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "filtfpca/grid.hpp"

namespace filtfpca {

/// One channel's continuous samples at a fixed rate.
struct RawRecording {
  std::string channel_id;
  Eigen::VectorXd samples;
  double sampling_rate = 0.0;  // Hz
};

struct PreprocessConfig {
  int epoch_length = 1000;           // samples per epoch
  std::optional<double> lowpass_hz;  // sharp DFT cutoff when set
  bool sqrt_transform = true;
  bool outlier_removal = true;
  bool drop_dc = false;  // remove the mean bin inside the low-pass

  void validate(double sampling_rate) const;
};

/// Consecutive non-overlapping epochs of `epoch_length` samples; the
/// trailing partial epoch is dropped. The epoch grid maps to [0,1].
FunctionGroup segment_epochs(const RawRecording& rec, int epoch_length);

/// Sharp spectral low-pass: DFT bins at frequencies strictly above
/// cutoff_hz are zeroed (DC retained unless drop_dc). cutoff_hz must be
/// below the Nyquist rate.
GridFunction lowpass_filter(const GridFunction& f, double cutoff_hz, double sampling_rate,
                            bool drop_dc = false);

/// Pointwise sign(x) sqrt(|x|); odd and monotone.
GridFunction signed_sqrt_transform(const GridFunction& f);

/// Removes epochs whose L2 norm falls outside
/// [Q1 - 1.5 IQR, Q3 + 1.5 IQR], quartiles by linear interpolation at
/// position (N-1)p. Returns the surviving group (order preserved) and
/// the removed row indices. Needs at least 4 epochs.
std::pair<FunctionGroup, std::vector<int>> remove_outliers(const FunctionGroup& g);

struct PreprocessResult {
  std::vector<FunctionGroup> groups;
  std::map<std::string, std::vector<int>> removed;  // per channel
};

/// Fixed pipeline: segment, filter, transform, outlier removal.
PreprocessResult preprocess(const std::vector<RawRecording>& recordings,
                            const PreprocessConfig& config);

/// Long CSV with header group_id,epoch_id,t_index,value; rows sorted by
/// (group, epoch, t index); 17-significant-digit decimals; LF endings.
std::vector<FunctionGroup> load_long_csv(const std::string& path);
void write_long_csv(const std::vector<FunctionGroup>& groups, const std::string& path);

/// Raw recording CSV with header channel_id,t_index,value.
std::vector<RawRecording> load_raw_csv(const std::string& path, double sampling_rate);
void write_raw_csv(const std::vector<RawRecording>& recordings, const std::string& path);

}  // namespace filtfpca
