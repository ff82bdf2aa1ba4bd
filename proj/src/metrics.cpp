#include "lincmdp/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

namespace lincmdp {

std::string format_number(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

void RunMetrics::record_episode(const LinearCmdpSpec& spec, const PolicyFn& policy, const EpisodeRecord& record) {
  require(record.loss_params != nullptr, "record_episode: missing loss parameters");
  EpisodeMetrics row;
  row.k = record.k;
  row.epoch = record.epoch;
  row.dual = record.dual;
  row.v_f_hat = record.v_f_hat;
  row.v_g_hat = record.v_g_hat;
  row.v_f_true = dp_policy_value(spec, policy, *record.loss_params).at(0, spec.initial_state());
  row.v_g_true = dp_policy_value(spec, policy, spec.theta_g()).at(0, spec.initial_state());
  row.mixed = record.mixed;
  row.reset = record.reset;
  rows_.push_back(row);
}

std::vector<double> RunMetrics::cumulative_regret(double v_star) const {
  std::vector<double> out;
  out.reserve(rows_.size());
  double total = 0.0;
  for (const auto& r : rows_) {
    total += r.v_f_true - v_star;
    out.push_back(total);
  }
  return out;
}

std::vector<double> RunMetrics::cumulative_violation() const {
  std::vector<double> out;
  out.reserve(rows_.size());
  double total = 0.0;
  for (const auto& r : rows_) {
    total += r.v_g_true - budget_;
    out.push_back(std::max(total, 0.0));
  }
  return out;
}

void RunMetrics::write_csv(std::ostream& out, std::optional<double> v_star) const {
  out << (v_star ? kEpisodeCsvHeader
                 : "k,epoch,Y,v_f_hat,v_g_hat,v_f_true,v_g_true,cum_violation,mixed_flag,reset_flag")
      << '\n';
  const auto violation = cumulative_violation();
  const auto regret = v_star ? cumulative_regret(*v_star) : std::vector<double>{};
  for (size_t i = 0; i < rows_.size(); ++i) {
    const auto& r = rows_[i];
    out << r.k << ',' << r.epoch << ',' << format_number(r.dual) << ',' << format_number(r.v_f_hat) << ','
        << format_number(r.v_g_hat) << ',' << format_number(r.v_f_true) << ',' << format_number(r.v_g_true) << ',';
    if (v_star) out << format_number(regret[i]) << ',';
    out << format_number(violation[i]) << ',' << (r.mixed ? 1 : 0) << ',' << (r.reset ? 1 : 0) << '\n';
  }
}

std::optional<double> second_half_loglog_slope(std::span<const double> curve) {
  const size_t n = curve.size();
  if (n < 2) return std::nullopt;
  const size_t first_k = (n + 1) / 2;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  long m = 0;
  for (size_t k = std::max<size_t>(first_k, 1); k <= n; ++k) {
    const double y = curve[k - 1];
    if (!(y > 0.0)) continue;
    const double lx = std::log(static_cast<double>(k));
    const double ly = std::log(y);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++m;
  }
  if (m < 2) return std::nullopt;
  const double denom = m * sxx - sx * sx;
  if (denom <= 0.0) return std::nullopt;
  return (m * sxy - sx * sy) / denom;
}

RunSummary RunMetrics::finalize(std::optional<double> v_star) const {
  RunSummary s;
  s.episodes = static_cast<int>(rows_.size());
  s.v_star = v_star;
  if (rows_.empty()) return s;
  if (v_star) {
    const auto regret = cumulative_regret(*v_star);
    s.final_regret = regret.back();
    s.regret_slope = second_half_loglog_slope(regret);
  }
  s.final_violation = cumulative_violation().back();

  constexpr int kWindows = 10;
  const size_t n = rows_.size();
  for (int w = 0; w < kWindows; ++w) {
    const size_t begin = n * static_cast<size_t>(w) / kWindows;
    const size_t end = n * static_cast<size_t>(w + 1) / kWindows;
    double total = 0.0;
    for (size_t i = begin; i < end; ++i) total += rows_[i].v_g_true - budget_;
    s.window_violation_mean.push_back(end > begin ? total / static_cast<double>(end - begin) : 0.0);
  }
  const size_t tail_begin = n - std::max<size_t>(n / 10, 1);
  double tail = 0.0;
  for (size_t i = tail_begin; i < n; ++i) tail += rows_[i].v_g_true - budget_;
  s.final_tenth_violation_mean = tail / static_cast<double>(n - tail_begin);

  for (const auto& r : rows_) {
    s.max_dual = std::max(s.max_dual, r.dual);
    s.epochs = std::max(s.epochs, r.epoch);
  }
  return s;
}

nlohmann::json RunSummary::to_json() const {
  nlohmann::json j = {{"episodes", episodes},
                      {"final_violation", final_violation},
                      {"window_violation_mean", window_violation_mean},
                      {"final_tenth_violation_mean", final_tenth_violation_mean},
                      {"max_Y", max_dual},
                      {"epochs", epochs}};
  if (v_star) j["v_star"] = *v_star;
  if (final_regret) j["final_regret"] = *final_regret;
  if (regret_slope) j["regret_slope"] = *regret_slope;
  return j;
}

}  // namespace lincmdp
