#include "hallaudit/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/beta.hpp>
#include <fmt/format.h>

#include "hallaudit/error.hpp"

namespace hallaudit::stats {

using nlohmann::json;

namespace {

constexpr Covariate kAllCovariates[] = {
    Covariate::intercept,          Covariate::has_aphasia,           Covariate::nonvocal_duration_s,
    Covariate::nonvocal_share,     Covariate::average_word_speed,    Covariate::word_count,
    Covariate::is_female,          Covariate::age,                   Covariate::age_squared,
    Covariate::race_african_american, Covariate::race_other,         Covariate::years_education,
    Covariate::english_first_language, Covariate::no_vision_loss,    Covariate::no_hearing_loss,
};

double softplus(double eta) { return eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta)); }

double sigmoid(double eta) {
  if (eta >= 0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

double normal_two_sided_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

std::string stars(double p) {
  if (p < 0.01) return "***";
  if (p < 0.05) return "**";
  if (p < 0.1) return "*";
  return "";
}

std::vector<std::string> default_names(Eigen::Index k) {
  std::vector<std::string> names;
  for (Eigen::Index i = 0; i < k; ++i) names.push_back(fmt::format("x{}", i));
  return names;
}

}  // namespace

const char* to_string(Covariate c) {
  switch (c) {
    case Covariate::intercept: return "intercept";
    case Covariate::has_aphasia: return "has_aphasia";
    case Covariate::nonvocal_duration_s: return "nonvocal_duration_s";
    case Covariate::nonvocal_share: return "nonvocal_share";
    case Covariate::average_word_speed: return "average_word_speed";
    case Covariate::word_count: return "word_count";
    case Covariate::is_female: return "is_female";
    case Covariate::age: return "age";
    case Covariate::age_squared: return "age_squared";
    case Covariate::race_african_american: return "race_african_american";
    case Covariate::race_other: return "race_other";
    case Covariate::years_education: return "years_education";
    case Covariate::english_first_language: return "english_first_language";
    case Covariate::no_vision_loss: return "no_vision_loss";
    case Covariate::no_hearing_loss: return "no_hearing_loss";
  }
  return "intercept";
}

Covariate parse_covariate(std::string_view name) {
  for (auto c : kAllCovariates)
    if (name == to_string(c)) return c;
  throw Error(ErrorKind::invalid_argument, "unknown covariate '" + std::string(name) + "'");
}

std::optional<double> covariate_value(Covariate c, const corpus::Speaker& s, const corpus::SegmentFeatures& f) {
  const auto flag = [](bool b) { return b ? 1.0 : 0.0; };
  switch (c) {
    case Covariate::intercept: return 1.0;
    case Covariate::has_aphasia: return flag(s.group == corpus::Group::aphasia);
    case Covariate::nonvocal_duration_s: return f.nonvocal_duration;
    case Covariate::nonvocal_share: return f.nonvocal_share;
    case Covariate::average_word_speed: return f.average_word_speed;
    case Covariate::word_count: return static_cast<double>(f.word_count);
    case Covariate::is_female:
      if (!s.gender) return std::nullopt;
      return flag(*s.gender == corpus::Gender::female);
    case Covariate::age:
      if (!s.age) return std::nullopt;
      return static_cast<double>(*s.age);
    case Covariate::age_squared:
      if (!s.age) return std::nullopt;
      return static_cast<double>(*s.age) * static_cast<double>(*s.age);
    case Covariate::race_african_american:
      if (!s.race) return std::nullopt;
      return flag(*s.race == corpus::Race::african_american);
    case Covariate::race_other:
      if (!s.race) return std::nullopt;
      return flag(*s.race == corpus::Race::other);
    case Covariate::years_education:
      if (!s.years_education) return std::nullopt;
      return static_cast<double>(*s.years_education);
    case Covariate::english_first_language:
      if (!s.english_first_language) return std::nullopt;
      return flag(*s.english_first_language);
    case Covariate::no_vision_loss:
      if (!s.vision_normal) return std::nullopt;
      return flag(*s.vision_normal);
    case Covariate::no_hearing_loss:
      if (!s.hearing_normal) return std::nullopt;
      return flag(*s.hearing_normal);
  }
  return std::nullopt;
}

void RegressionSpec::normalize() {
  std::set<Covariate> seen;
  for (auto c : covariates)
    if (!seen.insert(c).second)
      throw Error(ErrorKind::invalid_argument, fmt::format("covariate '{}' listed twice in spec '{}'", to_string(c), name));
  if (seen.contains(Covariate::age_squared) && !seen.contains(Covariate::age))
    throw Error(ErrorKind::invalid_argument, "age_squared requires age in spec '" + name + "'");
  std::erase(covariates, Covariate::intercept);
  covariates.insert(covariates.begin(), Covariate::intercept);
  if (!(tolerance > 0.0) || max_iterations < 1)
    throw Error(ErrorKind::invalid_argument, "spec '" + name + "' needs a positive tolerance and iteration cap");
}

DesignMatrix design_matrix(const corpus::Corpus& corpus, std::span<const corpus::SegmentFeatures> features,
                           const std::set<std::string>& positives, RegressionSpec spec) {
  spec.normalize();
  std::unordered_map<std::string_view, const corpus::SegmentFeatures*> by_id;
  for (const auto& f : features) by_id.emplace(f.segment_id, &f);

  const auto k = spec.covariates.size();
  std::vector<double> values;
  std::vector<double> outcomes;
  DesignMatrix d;
  for (const auto& seg : corpus.segments()) {
    const auto it = by_id.find(seg.segment_id);
    if (it == by_id.end()) {
      ++d.dropped;
      continue;
    }
    const auto& speaker = corpus.speaker_of(seg.segment_id);
    std::vector<double> row;
    row.reserve(k);
    for (auto c : spec.covariates) {
      const auto v = covariate_value(c, speaker, *it->second);
      if (!v) break;
      row.push_back(*v);
    }
    if (row.size() != k) {
      ++d.dropped;
      continue;
    }
    values.insert(values.end(), row.begin(), row.end());
    outcomes.push_back(positives.contains(seg.segment_id) ? 1.0 : 0.0);
    d.row_ids.push_back(seg.segment_id);
  }
  if (d.row_ids.empty())
    throw Error(ErrorKind::validation, "design matrix for '" + spec.name + "' is empty after dropping incomplete rows");

  const auto n = static_cast<Eigen::Index>(d.row_ids.size());
  d.x = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), n, static_cast<Eigen::Index>(k));
  d.y = Eigen::Map<const Eigen::VectorXd>(outcomes.data(), n);
  for (std::size_t j = 0; j < k; ++j) {
    d.columns.emplace_back(to_string(spec.covariates[j]));
    if (spec.covariates[j] == Covariate::intercept) continue;
    const auto col = d.x.col(static_cast<Eigen::Index>(j));
    if (col.maxCoeff() == col.minCoeff())
      throw Error(ErrorKind::validation,
                  fmt::format("covariate '{}' is constant in spec '{}'", d.columns.back(), spec.name));
  }
  return d;
}

double aic(std::size_t k, double log_likelihood) { return 2.0 * static_cast<double>(k) - 2.0 * log_likelihood; }

double logistic_log_likelihood(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = x * beta;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) ll += y[i] * eta[i] - softplus(eta[i]);
  return ll;
}

RegressionResult fit_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const RegressionSpec& spec,
                              std::span<const std::string> column_names) {
  const auto n = x.rows();
  const auto k = x.cols();
  if (y.size() != n) throw Error(ErrorKind::invalid_argument, "outcome length does not match design rows");
  if (n <= k) throw Error(ErrorKind::numeric, fmt::format("need more observations ({}) than coefficients ({})", n, k));
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  if (qr.rank() < k)
    throw Error(ErrorKind::numeric, fmt::format("design matrix is rank deficient (rank {} < {})", qr.rank(), k));

  RegressionResult r;
  r.name = spec.name;
  r.n_observations = static_cast<std::size_t>(n);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(k);
  double ll = logistic_log_likelihood(x, y, beta);
  r.log_likelihood_trace.push_back(ll);

  const auto information = [&](const Eigen::VectorXd& b, Eigen::VectorXd& score) {
    const Eigen::VectorXd eta = x * b;
    Eigen::VectorXd p(n), w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      p[i] = sigmoid(eta[i]);
      w[i] = p[i] * (1.0 - p[i]);
    }
    score = x.transpose() * (y - p);
    return Eigen::MatrixXd(x.transpose() * w.asDiagonal() * x);
  };

  Eigen::VectorXd score;
  double change = std::numeric_limits<double>::infinity();
  for (int it = 1;; ++it) {
    const Eigen::MatrixXd info = information(beta, score);
    // A small step alone is not enough on large designs: the score scales with n.
    if (change < spec.tolerance && score.cwiseAbs().maxCoeff() < kScoreTolerance) {
      r.converged = true;
      break;
    }
    if (it > spec.max_iterations) break;
    r.iterations = it;
    const Eigen::VectorXd newton = info.ldlt().solve(score);
    if (!newton.allFinite()) break;
    Eigen::VectorXd step = newton;
    Eigen::VectorXd next = beta + step;
    double next_ll = logistic_log_likelihood(x, y, next);
    // Once the predicted gain is below the likelihood's rounding noise, the
    // Newton step is judged by the score instead.
    const bool unresolved = 0.5 * score.dot(newton) < 1e-9 * std::max(1.0, std::abs(ll));
    if (!(next_ll >= ll) && unresolved) {
      Eigen::VectorXd next_score;
      information(next, next_score);
      if (!(next_score.cwiseAbs().maxCoeff() < score.cwiseAbs().maxCoeff())) {
        r.converged = score.cwiseAbs().maxCoeff() < kScoreTolerance;
        break;
      }
    } else {
      for (int h = 0; h < 40 && !(next_ll >= ll); ++h) {
        step *= 0.5;
        next = beta + step;
        next_ll = logistic_log_likelihood(x, y, next);
      }
      if (!(next_ll >= ll)) {
        r.converged = score.cwiseAbs().maxCoeff() < kScoreTolerance;
        break;
      }
    }
    change = step.cwiseAbs().maxCoeff();
    beta = next;
    ll = next_ll;
    r.log_likelihood_trace.push_back(ll);
    if (beta.cwiseAbs().maxCoeff() > kSeparationBound) {
      r.separation = true;
      break;
    }
  }

  const Eigen::MatrixXd info = information(beta, score);
  r.max_abs_score = score.cwiseAbs().maxCoeff();
  const Eigen::MatrixXd cov = info.ldlt().solve(Eigen::MatrixXd::Identity(k, k));
  const auto names = column_names.empty() ? default_names(k)
                                          : std::vector<std::string>(column_names.begin(), column_names.end());
  for (Eigen::Index j = 0; j < k; ++j) {
    Coefficient c;
    c.name = names.at(static_cast<std::size_t>(j));
    c.estimate = beta[j];
    c.standard_error = std::sqrt(std::max(0.0, cov(j, j)));
    c.z = c.standard_error > 0 ? c.estimate / c.standard_error : 0.0;
    c.p_value = normal_two_sided_p(c.z);
    r.coefficients.push_back(std::move(c));
  }
  r.log_likelihood = ll;
  r.aic = aic(static_cast<std::size_t>(k), ll);
  return r;
}

RegressionResult fit_logistic(const DesignMatrix& design, const RegressionSpec& spec) {
  return fit_logistic(design.x, design.y, spec, design.columns);
}

TestResult two_proportion_test(std::size_t x1, std::size_t n1, std::size_t x2, std::size_t n2, ProportionTest method) {
  if (n1 == 0 || n2 == 0) throw Error(ErrorKind::invalid_argument, "two-proportion test needs trials on both sides");
  if (x1 > n1 || x2 > n2) throw Error(ErrorKind::invalid_argument, "successes exceed trials");
  const double p1 = static_cast<double>(x1) / static_cast<double>(n1);
  const double p2 = static_cast<double>(x2) / static_cast<double>(n2);
  const double pooled = static_cast<double>(x1 + x2) / static_cast<double>(n1 + n2);
  const double var = pooled * (1.0 - pooled) * (1.0 / static_cast<double>(n1) + 1.0 / static_cast<double>(n2));
  const double z = var > 0 ? (p1 - p2) / std::sqrt(var) : 0.0;
  const double p = var > 0 ? normal_two_sided_p(z) : 1.0;
  if (method == ProportionTest::chi_square) return {z * z, std::clamp(p, 0.0, 1.0), "chi_square_2x2"};
  return {z, std::clamp(p, 0.0, 1.0), "two_proportion_pooled_z"};
}

Interval binomial_interval(std::size_t successes, std::size_t trials, double confidence) {
  if (trials == 0 || successes > trials) throw Error(ErrorKind::invalid_argument, "invalid binomial counts");
  if (!(confidence > 0.0 && confidence < 1.0)) throw Error(ErrorKind::invalid_argument, "confidence must be in (0, 1)");
  const double alpha = 1.0 - confidence;
  const auto x = static_cast<double>(successes);
  const auto n = static_cast<double>(trials);
  Interval ci;
  ci.lower = successes == 0 ? 0.0 : boost::math::quantile(boost::math::beta_distribution<>(x, n - x + 1), alpha / 2);
  ci.upper = successes == trials ? 1.0
                                 : boost::math::quantile(boost::math::beta_distribution<>(x + 1, n - x), 1 - alpha / 2);
  return ci;
}

double standardized_mean_difference(const Eigen::VectorXd& treated, const Eigen::VectorXd& control, double pooled_sd) {
  if (treated.size() == 0 || control.size() == 0) return 0.0;
  const double diff = treated.mean() - control.mean();
  if (pooled_sd > 0) return diff / pooled_sd;
  if (diff == 0.0) return 0.0;
  return diff > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
}

namespace {

double sample_variance(const Eigen::VectorXd& v) {
  if (v.size() < 2) return 0.0;
  return (v.array() - v.mean()).square().sum() / static_cast<double>(v.size() - 1);
}

}  // namespace

MatchResult mahalanobis_match(const Eigen::MatrixXd& treated, const Eigen::MatrixXd& control, double caliper,
                              std::span<const std::string> column_names) {
  if (treated.rows() == 0 || control.rows() == 0)
    throw Error(ErrorKind::invalid_argument, "matching needs at least one unit per arm");
  if (treated.cols() != control.cols() || treated.cols() == 0)
    throw Error(ErrorKind::invalid_argument, "treated and control covariate widths differ");
  if (!(caliper > 0.0)) throw Error(ErrorKind::invalid_argument, "caliper must be positive");
  const auto d = treated.cols();
  const auto nt = treated.rows();
  const auto nc = control.rows();

  MatchResult result;
  Eigen::MatrixXd all(nt + nc, d);
  all << treated, control;
  const Eigen::RowVectorXd mean = all.colwise().mean();
  const Eigen::MatrixXd centered = all.rowwise() - mean;
  Eigen::MatrixXd cov = centered.transpose() * centered / std::max<double>(1.0, static_cast<double>(all.rows() - 1));

  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov, Eigen::EigenvaluesOnly);
  const double max_ev = eig.eigenvalues().cwiseAbs().maxCoeff();
  if (llt.info() != Eigen::Success || eig.eigenvalues().minCoeff() <= 1e-12 * std::max(1.0, max_ev)) {
    cov += 1e-8 * Eigen::MatrixXd::Identity(d, d);
    llt.compute(cov);
    result.ridge_applied = true;
    if (llt.info() != Eigen::Success) throw Error(ErrorKind::numeric, "covariance singular even after ridge");
  }
  // Whitened rows: Mahalanobis distance becomes Euclidean.
  const Eigen::MatrixXd zt = llt.matrixL().solve(treated.transpose()).transpose();
  const Eigen::MatrixXd zc = llt.matrixL().solve(control.transpose()).transpose();
  const auto dist = [&](Eigen::Index i, Eigen::Index j) { return (zt.row(i) - zc.row(j)).norm(); };

  std::vector<double> nearest(static_cast<std::size_t>(nt), std::numeric_limits<double>::infinity());
  double mean_d = 0.0, m2 = 0.0;
  std::size_t count = 0;
  for (Eigen::Index i = 0; i < nt; ++i)
    for (Eigen::Index j = 0; j < nc; ++j) {
      const double v = dist(i, j);
      nearest[static_cast<std::size_t>(i)] = std::min(nearest[static_cast<std::size_t>(i)], v);
      ++count;
      const double delta = v - mean_d;
      mean_d += delta / static_cast<double>(count);
      m2 += delta * (v - mean_d);
    }
  result.distance_sd = count > 1 ? std::sqrt(m2 / static_cast<double>(count - 1)) : 0.0;
  result.caliper_distance = caliper * result.distance_sd;

  std::vector<std::size_t> order(static_cast<std::size_t>(nt));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return nearest[a] > nearest[b]; });

  std::vector<bool> used(static_cast<std::size_t>(nc), false);
  for (const auto i : order) {
    Eigen::Index best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < nc; ++j) {
      if (used[static_cast<std::size_t>(j)]) continue;
      const double v = dist(static_cast<Eigen::Index>(i), j);
      if (v < best_d) {
        best_d = v;
        best = j;
      }
    }
    if (best < 0) break;
    if (best_d > result.caliper_distance) continue;
    used[static_cast<std::size_t>(best)] = true;
    result.pairs.push_back({i, static_cast<std::size_t>(best), best_d});
  }
  result.n_matched = result.pairs.size();

  const auto names = column_names.empty() ? default_names(d)
                                          : std::vector<std::string>(column_names.begin(), column_names.end());
  Eigen::MatrixXd mt(static_cast<Eigen::Index>(result.n_matched), d), mc(static_cast<Eigen::Index>(result.n_matched), d);
  for (std::size_t p = 0; p < result.pairs.size(); ++p) {
    mt.row(static_cast<Eigen::Index>(p)) = treated.row(static_cast<Eigen::Index>(result.pairs[p].treated));
    mc.row(static_cast<Eigen::Index>(p)) = control.row(static_cast<Eigen::Index>(result.pairs[p].control));
  }
  for (Eigen::Index c = 0; c < d; ++c) {
    const Eigen::VectorXd t = treated.col(c), u = control.col(c);
    const double sd = std::sqrt((sample_variance(t) + sample_variance(u)) / 2.0);
    Balance b;
    b.covariate = names.at(static_cast<std::size_t>(c));
    b.smd_before = standardized_mean_difference(t, u, sd);
    b.smd_after = standardized_mean_difference(mt.col(c), mc.col(c), sd);
    result.balance.push_back(std::move(b));
  }
  return result;
}

MatchInput match_input(const corpus::Corpus& corpus, std::span<const corpus::SegmentFeatures> features,
                       std::span<const Covariate> covariates) {
  if (covariates.empty()) throw Error(ErrorKind::invalid_argument, "matching needs at least one covariate");
  std::unordered_map<std::string_view, const corpus::SegmentFeatures*> by_id;
  for (const auto& f : features) by_id.emplace(f.segment_id, &f);
  std::vector<double> tv, cv;
  MatchInput in;
  for (auto c : covariates) {
    if (c == Covariate::intercept || c == Covariate::has_aphasia)
      throw Error(ErrorKind::invalid_argument, fmt::format("'{}' cannot be a matching covariate", to_string(c)));
    in.columns.emplace_back(to_string(c));
  }
  for (const auto& seg : corpus.segments()) {
    const auto it = by_id.find(seg.segment_id);
    if (it == by_id.end()) continue;
    const auto& speaker = corpus.speaker_of(seg.segment_id);
    std::vector<double> row;
    for (auto c : covariates) {
      const auto v = covariate_value(c, speaker, *it->second);
      if (!v) break;
      row.push_back(*v);
    }
    if (row.size() != covariates.size()) continue;
    auto& target = speaker.group == corpus::Group::aphasia ? tv : cv;
    target.insert(target.end(), row.begin(), row.end());
    (speaker.group == corpus::Group::aphasia ? in.treated_ids : in.control_ids).push_back(seg.segment_id);
  }
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const auto k = static_cast<Eigen::Index>(covariates.size());
  in.treated = Eigen::Map<const RowMajor>(tv.data(), static_cast<Eigen::Index>(in.treated_ids.size()), k);
  in.control = Eigen::Map<const RowMajor>(cv.data(), static_cast<Eigen::Index>(in.control_ids.size()), k);
  return in;
}

RateComparison group_rate_comparison(const corpus::Corpus& corpus, const std::set<std::string>& positives,
                                     const std::optional<std::set<std::string>>& subset) {
  RateComparison r;
  for (const auto& seg : corpus.segments()) {
    if (subset && !subset->contains(seg.segment_id)) continue;
    auto& g = corpus.speaker_of(seg.segment_id).group == corpus::Group::aphasia ? r.aphasia : r.control;
    ++g.segments;
    if (positives.contains(seg.segment_id)) ++g.hallucinated;
  }
  if (r.aphasia.segments == 0 || r.control.segments == 0)
    throw Error(ErrorKind::validation, "rate comparison needs segments in both groups");
  for (auto* g : {&r.aphasia, &r.control})
    g->rate = static_cast<double>(g->hallucinated) / static_cast<double>(g->segments);
  r.test = two_proportion_test(r.aphasia.hallucinated, r.aphasia.segments, r.control.hallucinated, r.control.segments);
  return r;
}

namespace {

// "10830" -> "10,830", "-1597.125" -> "-1,597.125".
std::string thousands(std::string s) {
  const std::size_t begin = s.starts_with('-') ? 1 : 0;
  const std::size_t dot = std::min(s.find('.'), s.size());
  for (std::size_t i = dot; i > begin + 3; i -= 3) s.insert(i - 3, ",");
  return s;
}

}  // namespace

std::string format_regression_table(std::span<const RegressionResult> results) {
  std::vector<std::string> rows;
  for (const auto& r : results)
    for (const auto& c : r.coefficients)
      if (std::find(rows.begin(), rows.end(), c.name) == rows.end()) rows.push_back(c.name);
  // Intercept goes last, as is customary.
  if (const auto it = std::find(rows.begin(), rows.end(), "intercept"); it != rows.end()) std::rotate(it, it + 1, rows.end());

  std::size_t label_width = 26;
  for (const auto& row : rows) label_width = std::max(label_width, row.size() + 2);
  constexpr std::size_t cell = 18;
  std::string out;
  const auto line = [&](const std::string& label, const std::vector<std::string>& cells) {
    out += fmt::format("{:<{}}", label, label_width);
    for (const auto& c : cells) out += fmt::format("{:>{}}", c, cell);
    out += '\n';
  };
  const std::string rule(label_width + cell * results.size(), '-');

  std::vector<std::string> header;
  for (const auto& r : results) header.push_back(r.name);
  out += rule + '\n';
  line("", header);
  out += rule + '\n';
  for (const auto& row : rows) {
    std::vector<std::string> est, se;
    for (const auto& r : results) {
      const auto it = std::find_if(r.coefficients.begin(), r.coefficients.end(),
                                   [&](const Coefficient& c) { return c.name == row; });
      if (it == r.coefficients.end()) {
        est.emplace_back("");
        se.emplace_back("");
      } else {
        est.push_back(fmt::format("{:.3f}{}", it->estimate, stars(it->p_value)));
        se.push_back(fmt::format("({:.3f})", it->standard_error));
      }
    }
    line(row, est);
    line("", se);
  }
  out += rule + '\n';
  std::vector<std::string> obs, ll, ai;
  for (const auto& r : results) {
    obs.push_back(thousands(fmt::format("{}", r.n_observations)));
    ll.push_back(thousands(fmt::format("{:.3f}", r.log_likelihood)));
    ai.push_back(thousands(fmt::format("{:.3f}", r.aic)));
  }
  line("Observations", obs);
  line("Log Likelihood", ll);
  line("Akaike Inf. Crit.", ai);
  out += rule + '\n';
  out += "Note: *p<0.1; **p<0.05; ***p<0.01\n";
  return out;
}

json to_json(const RegressionResult& r) {
  json coefficients = json::array();
  for (const auto& c : r.coefficients)
    coefficients.push_back(json{{"name", c.name},
                                {"estimate", c.estimate},
                                {"standard_error", c.standard_error},
                                {"z", c.z},
                                {"p_value", c.p_value}});
  return json{{"name", r.name},
              {"coefficients", std::move(coefficients)},
              {"log_likelihood", r.log_likelihood},
              {"aic", r.aic},
              {"n_observations", r.n_observations},
              {"converged", r.converged},
              {"separation", r.separation},
              {"iterations", r.iterations},
              {"max_abs_score", r.max_abs_score}};
}

json to_json(const TestResult& t) { return json{{"statistic", t.statistic}, {"p_value", t.p_value}, {"method", t.method}}; }

json to_json(const MatchResult& m) {
  json balance = json::array();
  for (const auto& b : m.balance)
    balance.push_back(json{{"covariate", b.covariate}, {"smd_before", b.smd_before}, {"smd_after", b.smd_after}});
  return json{{"n_matched", m.n_matched},
              {"distance_sd", m.distance_sd},
              {"caliper_distance", m.caliper_distance},
              {"ridge_applied", m.ridge_applied},
              {"balance", std::move(balance)}};
}

json to_json(const RateComparison& r) {
  const auto group = [](const GroupRate& g) {
    return json{{"segments", g.segments}, {"hallucinated", g.hallucinated}, {"rate", g.rate}};
  };
  return json{{"aphasia", group(r.aphasia)}, {"control", group(r.control)}, {"test", to_json(r.test)}};
}

json to_json(const RegressionSpec& s) {
  json covs = json::array();
  for (auto c : s.covariates) covs.push_back(to_string(c));
  return json{{"name", s.name}, {"covariates", std::move(covs)}, {"tolerance", s.tolerance}, {"max_iterations", s.max_iterations}};
}

json to_json(const MatchSpec& s) {
  json covs = json::array();
  for (auto c : s.covariates) covs.push_back(to_string(c));
  return json{{"name", s.name}, {"covariates", std::move(covs)}, {"caliper", s.caliper}};
}

RegressionSpec regression_spec_from_json(const json& j) {
  RegressionSpec s;
  s.name = j.value("name", s.name);
  for (const auto& c : j.at("covariates")) s.covariates.push_back(parse_covariate(c.get<std::string>()));
  s.tolerance = j.value("tolerance", s.tolerance);
  s.max_iterations = j.value("max_iterations", s.max_iterations);
  s.normalize();
  return s;
}

MatchSpec match_spec_from_json(const json& j) {
  MatchSpec s;
  s.name = j.value("name", s.name);
  for (const auto& c : j.at("covariates")) s.covariates.push_back(parse_covariate(c.get<std::string>()));
  s.caliper = j.value("caliper", s.caliper);
  if (!(s.caliper > 0.0)) throw Error(ErrorKind::invalid_argument, "caliper must be positive");
  return s;
}

}  // namespace hallaudit::stats
