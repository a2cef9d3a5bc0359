#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "hallaudit/corpus.hpp"

namespace hallaudit::stats {

enum class Covariate {
  intercept,
  has_aphasia,
  nonvocal_duration_s,
  nonvocal_share,
  average_word_speed,
  word_count,
  is_female,
  age,
  age_squared,
  race_african_american,
  race_other,
  years_education,
  english_first_language,
  no_vision_loss,
  no_hearing_loss,
};

const char* to_string(Covariate covariate);
Covariate parse_covariate(std::string_view name);

// Value of one covariate for a segment, or nothing when the underlying field
// is missing (unknown demographics, VAD not run).
std::optional<double> covariate_value(Covariate covariate, const corpus::Speaker& speaker,
                                      const corpus::SegmentFeatures& features);

struct RegressionSpec {
  std::string name = "model";
  std::vector<Covariate> covariates;
  double tolerance = 1e-8;
  int max_iterations = 50;

  // Puts the intercept first (adding it if absent); rejects duplicates and
  // age_squared without age.
  void normalize();
};

struct DesignMatrix {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  std::vector<std::string> row_ids;
  std::vector<std::string> columns;
  std::size_t dropped = 0;  // rows lacking a requested covariate
};

// One row per corpus segment (corpus order) with every covariate present;
// y = 1 iff the segment id is in `positives`.
DesignMatrix design_matrix(const corpus::Corpus& corpus, std::span<const corpus::SegmentFeatures> features,
                           const std::set<std::string>& positives, RegressionSpec spec);

struct Coefficient {
  std::string name;
  double estimate = 0.0;
  double standard_error = 0.0;
  double z = 0.0;
  double p_value = 1.0;
};

struct RegressionResult {
  std::string name;
  std::vector<Coefficient> coefficients;
  double log_likelihood = 0.0;
  double aic = 0.0;
  std::size_t n_observations = 0;
  bool converged = false;
  bool separation = false;  // some |coefficient| passed the divergence bound
  int iterations = 0;
  double max_abs_score = 0.0;
  std::vector<double> log_likelihood_trace;  // after each iteration, starting at beta = 0
};

inline constexpr double kSeparationBound = 30.0;
inline constexpr double kScoreTolerance = 1e-6;

double aic(std::size_t k, double log_likelihood);
double logistic_log_likelihood(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& beta);

// IRLS with step halving. Throws on rank deficiency or n <= k.
RegressionResult fit_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const RegressionSpec& spec,
                              std::span<const std::string> column_names = {});
RegressionResult fit_logistic(const DesignMatrix& design, const RegressionSpec& spec);

enum class ProportionTest { pooled_z, chi_square };

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::string method;
};

TestResult two_proportion_test(std::size_t x1, std::size_t n1, std::size_t x2, std::size_t n2,
                               ProportionTest method = ProportionTest::pooled_z);

struct Interval {
  double lower = 0.0;
  double upper = 1.0;
};

// Exact (Clopper-Pearson) interval for a binomial proportion.
Interval binomial_interval(std::size_t successes, std::size_t trials, double confidence = 0.95);

struct MatchSpec {
  std::string name = "match";
  std::vector<Covariate> covariates;
  double caliper = 0.20;
};

struct MatchPair {
  std::size_t treated = 0;
  std::size_t control = 0;
  double distance = 0.0;
};

struct Balance {
  std::string covariate;
  double smd_before = 0.0;
  double smd_after = 0.0;
};

struct MatchResult {
  std::vector<MatchPair> pairs;  // in processing order
  std::vector<Balance> balance;
  std::size_t n_matched = 0;
  double distance_sd = 0.0;
  double caliper_distance = 0.0;  // caliper * distance_sd
  bool ridge_applied = false;
};

// Greedy 1:1 Mahalanobis matching without replacement. Treated rows are
// visited by decreasing distance to their nearest control (ties: lower
// index); each takes its nearest unused control (ties: lower index) and the
// pair is discarded when farther than caliper * SD of all treated-control
// distances. SMDs use the pooled pre-match SD.
MatchResult mahalanobis_match(const Eigen::MatrixXd& treated, const Eigen::MatrixXd& control, double caliper,
                              std::span<const std::string> column_names = {});

// Segment-level matching input: aphasia rows are treated, control rows control.
struct MatchInput {
  Eigen::MatrixXd treated;
  Eigen::MatrixXd control;
  std::vector<std::string> treated_ids;
  std::vector<std::string> control_ids;
  std::vector<std::string> columns;
};

MatchInput match_input(const corpus::Corpus& corpus, std::span<const corpus::SegmentFeatures> features,
                       std::span<const Covariate> covariates);

double standardized_mean_difference(const Eigen::VectorXd& treated, const Eigen::VectorXd& control,
                                    double pooled_sd);

struct GroupRate {
  std::size_t segments = 0;
  std::size_t hallucinated = 0;
  double rate = 0.0;
};

struct RateComparison {
  GroupRate aphasia;
  GroupRate control;
  TestResult test;
};

// Rates over `subset` when given, else over the whole corpus.
RateComparison group_rate_comparison(const corpus::Corpus& corpus, const std::set<std::string>& positives,
                                     const std::optional<std::set<std::string>>& subset = std::nullopt);

// Regression table: estimate with stars (0.1/0.05/0.01), SE below, then
// observations, log likelihood and AIC.
std::string format_regression_table(std::span<const RegressionResult> results);

nlohmann::json to_json(const RegressionResult& result);
nlohmann::json to_json(const TestResult& result);
nlohmann::json to_json(const MatchResult& result);
nlohmann::json to_json(const RateComparison& result);
nlohmann::json to_json(const RegressionSpec& spec);
nlohmann::json to_json(const MatchSpec& spec);
RegressionSpec regression_spec_from_json(const nlohmann::json& j);
MatchSpec match_spec_from_json(const nlohmann::json& j);

}  // namespace hallaudit::stats
