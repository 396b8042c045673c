#include "qcons/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "parallel.hpp"
#include "qcons/rng.hpp"

namespace qcons {

namespace {

using Index = Eigen::Index;

bool entropy_coded(QuantizerKind kind) {
  return kind == QuantizerKind::ecsq_uniform || kind == QuantizerKind::dithered_uniform;
}

struct TrialSums {
  std::vector<double> mse;         // T+1
  std::vector<double> distortion;  // m T, slot-major t*m+i
  std::vector<double> value_sum;
  std::vector<double> value_sq_sum;
  double drift = 0.0;
};

}  // namespace

std::string_view to_string(QuantizerKind kind) {
  switch (kind) {
    case QuantizerKind::fixed_uniform: return "fixed_uniform";
    case QuantizerKind::ecsq_uniform: return "ecsq_uniform";
    case QuantizerKind::dithered_uniform: return "dithered_uniform";
    case QuantizerKind::gaussian_noise_proxy: return "gaussian_noise_proxy";
  }
  return "unknown";
}

QuantizerKind quantizer_kind_from_string(std::string_view name) {
  if (name == "fixed_uniform") return QuantizerKind::fixed_uniform;
  if (name == "ecsq_uniform") return QuantizerKind::ecsq_uniform;
  if (name == "dithered_uniform") return QuantizerKind::dithered_uniform;
  if (name == "gaussian_noise_proxy") return QuantizerKind::gaussian_noise_proxy;
  throw std::invalid_argument("unknown quantizer kind '" + std::string(name) + "'");
}

QuantizerFamily family_of(QuantizerKind kind) {
  switch (kind) {
    case QuantizerKind::fixed_uniform: return QuantizerFamily::fixed_uniform;
    case QuantizerKind::ecsq_uniform: return QuantizerFamily::ecsq;
    case QuantizerKind::dithered_uniform: return QuantizerFamily::dithered_uniform;
    case QuantizerKind::gaussian_noise_proxy: return QuantizerFamily::vq_proxy;
  }
  return QuantizerFamily::ecsq;
}

double SlotQuantizer::step() const {
  if (kind == QuantizerKind::fixed_uniform)
    return range_multiplier * std::sqrt(sigma2) / std::exp2(rate_bits);
  return std::sqrt(12.0 * distortion);
}

QuantizerSchedule::QuantizerSchedule(std::size_t m, std::size_t horizon,
                                     std::vector<SlotQuantizer> slots)
    : m_(m), horizon_(horizon), slots_(std::move(slots)) {
  if (slots_.size() != m_ * horizon_)
    throw std::invalid_argument("quantizer schedule needs m*T slots");
  for (const auto& s : slots_) {
    if (s.lossless || s.zero_rate) continue;
    if (s.kind == QuantizerKind::fixed_uniform) {
      if (s.rate_bits < 1) throw std::invalid_argument("fixed_uniform needs R >= 1");
      if (!(s.sigma2 > 0.0)) throw std::invalid_argument("fixed_uniform needs sigma2 > 0");
    } else if (!(s.distortion > 0.0)) {
      throw std::invalid_argument("quantizer distortion must be positive");
    }
  }
}

QuantizerSchedule make_quantizer_schedule(QuantizerKind kind, const DistortionSchedule& d,
                                          const std::vector<MomentState>& states,
                                          const RdModel& model) {
  const std::size_t m = d.nodes();
  const std::size_t horizon = d.horizon();
  if (states.size() < horizon) throw std::invalid_argument("not enough moment states");
  std::vector<SlotQuantizer> slots;
  slots.reserve(m * horizon);
  for (std::size_t t = 0; t < horizon; ++t) {
    for (std::size_t i = 0; i < m; ++i) {
      SlotQuantizer s;
      s.kind = kind;
      s.distortion = d.at(i, t);
      s.center = states[t].mu_z(static_cast<Index>(i));
      s.sigma2 = marginal_variance(states[t], i);
      const double rate = rate_of(model, s.sigma2, s.distortion);
      s.zero_rate = rate == 0.0;
      if (kind == QuantizerKind::fixed_uniform && !s.zero_rate)
        s.rate_bits = std::max(1, static_cast<int>(std::ceil(rate - 1e-9)));
      slots.push_back(s);
    }
  }
  return QuantizerSchedule(m, horizon, std::move(slots));
}

QuantizerSchedule lossless_schedule(std::size_t m, std::size_t horizon) {
  SlotQuantizer s;
  s.lossless = true;
  return QuantizerSchedule(m, horizon, std::vector<SlotQuantizer>(m * horizon, s));
}

QuantizedBlock quantize_uniform(std::span<const double> values, double step,
                                std::span<const double> dither) {
  if (!(step > 0.0)) throw std::invalid_argument("quantizer step must be positive");
  if (!dither.empty() && dither.size() != values.size())
    throw std::invalid_argument("dither length must match the input");
  QuantizedBlock out;
  out.indices.resize(values.size());
  out.values.resize(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) {
    const double u = dither.empty() ? 0.0 : dither[k];
    const double idx = std::nearbyint((values[k] + u) / step);
    out.indices[k] = static_cast<std::int64_t>(idx);
    out.values[k] = step * idx - u;
  }
  return out;
}

QuantizedBlock quantize_fixed(std::span<const double> values, int rate_bits, double center,
                              double sigma, double range_multiplier) {
  if (rate_bits < 1 || rate_bits > 62) throw std::invalid_argument("fixed rate must be in [1, 62]");
  if (!(sigma > 0.0)) throw std::invalid_argument("fixed quantizer needs sigma > 0");
  const auto levels = std::int64_t{1} << rate_bits;
  const double width = range_multiplier * sigma;
  const double step = width / static_cast<double>(levels);
  const double lo = center - 0.5 * width;
  QuantizedBlock out;
  out.indices.resize(values.size());
  out.values.resize(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) {
    const double cell = std::floor((values[k] - lo) / step);
    const auto idx = static_cast<std::int64_t>(
        std::clamp(cell, 0.0, static_cast<double>(levels - 1)));
    out.indices[k] = idx;
    out.values[k] = lo + (static_cast<double>(idx) + 0.5) * step;
  }
  return out;
}

double zero_rate_value(const SlotQuantizer& slot) { return slot.center; }

double empirical_entropy_bits(const IndexHistogram& histogram) {
  std::uint64_t total = 0;
  for (const auto& [idx, count] : histogram) total += count;
  if (total == 0) throw std::invalid_argument("entropy of an empty index set");
  double h = 0.0;
  const auto n = static_cast<double>(total);
  for (const auto& [idx, count] : histogram) {
    if (count == 0) continue;
    const double p = static_cast<double>(count) / n;
    h -= p * std::log2(p);
  }
  return h;
}

double empirical_entropy_bits(std::span<const std::int64_t> indices) {
  IndexHistogram hist;
  for (auto k : indices) ++hist[k];
  return empirical_entropy_bits(hist);
}

double empirical_rate(std::span<const std::int64_t> indices, const SlotQuantizer& slot,
                      double r_c, double variance) {
  if (indices.empty() && entropy_coded(slot.kind) && !slot.zero_rate && !slot.lossless)
    throw std::invalid_argument("empirical_rate needs at least one symbol");
  if (slot.zero_rate || slot.lossless) return 0.0;
  switch (slot.kind) {
    case QuantizerKind::fixed_uniform: return slot.rate_bits;
    case QuantizerKind::gaussian_noise_proxy: return rate_of(r_c, variance, slot.distortion);
    default: return empirical_entropy_bits(indices);
  }
}

SimResult run_consensus(const WeightMatrix& w, const SignalSpec& signal,
                        const QuantizerSchedule& schedule, const SimOptions& options) {
  const std::size_t m = w.size();
  const std::size_t horizon = schedule.horizon();
  const std::size_t length = signal.length;
  if (schedule.nodes() != m) throw std::invalid_argument("schedule node count does not match W");
  if (horizon < 1) throw std::invalid_argument("horizon must be at least 1");
  if (length < 1 || options.trials < 1) throw std::invalid_argument("L and trials must be >= 1");
  if (signal.sigma_x2 < 0 || signal.sigma_n2 < 0)
    throw std::invalid_argument("signal variances must be nonnegative");

  const auto n = static_cast<Index>(m);
  const auto len = static_cast<Index>(length);
  const Matrix w_minus_i = w.matrix() - Matrix::Identity(n, n);
  const std::size_t nslots = m * horizon;
  const unsigned workers = std::max(1u, options.threads);

  std::vector<TrialSums> trial_sums(options.trials);
  std::vector<std::vector<IndexHistogram>> histograms(workers,
                                                      std::vector<IndexHistogram>(nslots));

  detail::parallel_for(options.trials, workers, [&](std::size_t trial, unsigned worker) {
    TrialSums sums;
    sums.mse.assign(horizon + 1, 0.0);
    sums.distortion.assign(nslots, 0.0);
    sums.value_sum.assign(nslots, 0.0);
    sums.value_sq_sum.assign(nslots, 0.0);
    auto& hist = histograms[worker];

    // Columns are nodes: z.col(i) is the length-L state of node i.
    Matrix z(len, n);
    {
      auto rng = keyed_stream(options.seed, trial, 0, 0, StreamRole::signal);
      std::normal_distribution<double> gauss(0.0, std::sqrt(signal.sigma_x2));
      Vector x(len);
      for (Index k = 0; k < len; ++k) x(k) = gauss(rng);
      for (Index i = 0; i < n; ++i) {
        auto nrng = keyed_stream(options.seed, trial, static_cast<std::uint64_t>(i), 0,
                                 StreamRole::noise);
        std::normal_distribution<double> noise(0.0, std::sqrt(signal.sigma_n2));
        for (Index k = 0; k < len; ++k) z(k, i) = x(k) + noise(nrng);
      }
    }
    const Vector zbar = z.rowwise().mean();
    const Eigen::ArrayXd drift_scale = zbar.array().abs().max(1.0);
    sums.mse[0] = (z.colwise() - zbar).squaredNorm();

    Matrix q(len, n);
    std::vector<double> dither(length);
    for (std::size_t t = 0; t < horizon; ++t) {
      for (std::size_t i = 0; i < m; ++i) {
        const SlotQuantizer& slot = schedule.at(i, t);
        const std::size_t slot_id = t * m + i;
        const auto col = static_cast<Index>(i);
        std::span<const double> v(z.col(col).data(), length);
        if (slot.lossless) {
          q.col(col) = z.col(col);
        } else if (slot.zero_rate) {
          q.col(col).setConstant(zero_rate_value(slot));
        } else {
          auto rng = keyed_stream(options.seed, trial, i, t, StreamRole::quantizer);
          switch (slot.kind) {
            case QuantizerKind::gaussian_noise_proxy: {
              std::normal_distribution<double> noise(0.0, std::sqrt(slot.distortion));
              for (Index k = 0; k < len; ++k) q(k, col) = z(k, col) + noise(rng);
              break;
            }
            case QuantizerKind::fixed_uniform: {
              auto block = quantize_fixed(v, slot.rate_bits, slot.center, std::sqrt(slot.sigma2),
                                          slot.range_multiplier);
              for (Index k = 0; k < len; ++k) q(k, col) = block.values[static_cast<std::size_t>(k)];
              break;
            }
            case QuantizerKind::ecsq_uniform:
            case QuantizerKind::dithered_uniform: {
              const double step = slot.step();
              std::span<const double> u;
              if (slot.kind == QuantizerKind::dithered_uniform) {
                std::uniform_real_distribution<double> offset(-0.5 * step, 0.5 * step);
                for (auto& value : dither) value = offset(rng);
                u = dither;
              }
              // Quantize around the model mean so zero stays a level.
              std::vector<double> centered(v.begin(), v.end());
              for (auto& c : centered) c -= slot.center;
              auto block = quantize_uniform(centered, step, u);
              for (Index k = 0; k < len; ++k)
                q(k, col) = block.values[static_cast<std::size_t>(k)] + slot.center;
              for (auto idx : block.indices) ++hist[slot_id][idx];
              break;
            }
          }
        }
        sums.distortion[slot_id] += (q.col(col) - z.col(col)).squaredNorm();
        sums.value_sum[slot_id] += z.col(col).sum();
        sums.value_sq_sum[slot_id] += z.col(col).squaredNorm();
      }
      z.noalias() += q * w_minus_i;
      const Vector mean_now = z.rowwise().mean();
      sums.drift = std::max(sums.drift, ((mean_now - zbar).array().abs() / drift_scale).maxCoeff());
      sums.mse[t + 1] = (z.colwise() - zbar).squaredNorm();
    }
    trial_sums[trial] = std::move(sums);
  });

  // Reduce in trial order so the floating-point sums are thread-count independent.
  SimResult result;
  result.trials = options.trials;
  result.length = length;
  result.seed = options.seed;
  result.empirical_mse.assign(horizon + 1, 0.0);
  std::vector<double> distortion(nslots, 0.0), value_sum(nslots, 0.0), value_sq(nslots, 0.0);
  for (const auto& s : trial_sums) {
    for (std::size_t t = 0; t <= horizon; ++t) result.empirical_mse[t] += s.mse[t];
    for (std::size_t k = 0; k < nslots; ++k) {
      distortion[k] += s.distortion[k];
      value_sum[k] += s.value_sum[k];
      value_sq[k] += s.value_sq_sum[k];
    }
    result.max_mean_drift = std::max(result.max_mean_drift, s.drift);
  }
  const double per_node_samples = static_cast<double>(length) * static_cast<double>(options.trials);
  for (auto& v : result.empirical_mse) v /= per_node_samples * static_cast<double>(m);

  std::vector<IndexHistogram> merged(nslots);
  for (const auto& worker_hist : histograms)
    for (std::size_t k = 0; k < nslots; ++k)
      for (const auto& [idx, count] : worker_hist[k]) merged[k][idx] += count;

  result.empirical_rate = Matrix::Zero(n, static_cast<Index>(horizon));
  result.empirical_distortion = Matrix::Zero(n, static_cast<Index>(horizon));
  result.empirical_variance = Matrix::Zero(n, static_cast<Index>(horizon));
  for (std::size_t t = 0; t < horizon; ++t) {
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t k = t * m + i;
      const auto r = static_cast<Index>(i);
      const auto c = static_cast<Index>(t);
      const SlotQuantizer& slot = schedule.at(i, t);
      const double mean = value_sum[k] / per_node_samples;
      const double variance = std::max(0.0, value_sq[k] / per_node_samples - mean * mean);
      result.empirical_variance(r, c) = variance;
      result.empirical_distortion(r, c) = distortion[k] / per_node_samples;
      if (slot.zero_rate) result.zero_rate_slots.emplace_back(i, t);
      if (slot.zero_rate || slot.lossless) continue;
      if (entropy_coded(slot.kind))
        result.empirical_rate(r, c) = empirical_entropy_bits(merged[k]);
      else
        result.empirical_rate(r, c) = empirical_rate({}, slot, options.r_c, variance);
    }
  }
  result.aggregate_rate_bits = result.empirical_rate.sum();
  return result;
}

nlohmann::json to_json(const SimResult& result) {
  auto rows = [](const Matrix& a) {
    nlohmann::json out = nlohmann::json::array();
    for (Index r = 0; r < a.rows(); ++r) {
      std::vector<double> row(static_cast<std::size_t>(a.cols()));
      for (Index c = 0; c < a.cols(); ++c) row[static_cast<std::size_t>(c)] = a(r, c);
      out.push_back(std::move(row));
    }
    return out;
  };
  nlohmann::json zero = nlohmann::json::array();
  for (const auto& [i, t] : result.zero_rate_slots) zero.push_back({i, t});
  return {{"empirical_mse_per_iter", result.empirical_mse},
          {"empirical_rate", rows(result.empirical_rate)},
          {"empirical_distortion", rows(result.empirical_distortion)},
          {"aggregate_rate_bits", result.aggregate_rate_bits},
          {"trials", result.trials},
          {"L", result.length},
          {"seed", result.seed},
          {"zero_rate_slots", std::move(zero)},
          {"max_mean_drift", result.max_mean_drift}};
}

}  // namespace qcons
