#include "drnav/regression.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "drnav/error.hpp"

namespace drnav {

void validate(const SlotObservation& obs) {
  const bool finite = std::isfinite(obs.v_prev) && std::isfinite(obs.a_mean) && std::isfinite(obs.dt) &&
                      std::isfinite(obs.g_dist) && std::isfinite(obs.v_end);
  if (!finite) throw Error(ErrorCode::kInvalidValue, "slot observation has non-finite fields");
  if (!(obs.dt > 0.0)) throw Error(ErrorCode::kInvalidValue, "slot observation dt must be positive");
  if (obs.v_prev < 0.0 || obs.v_end < 0.0) {
    throw Error(ErrorCode::kInvalidValue, "slot observation speeds must be non-negative");
  }
}

TrainingBuffer::TrainingBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw Error(ErrorCode::kInvalidValue, "training buffer capacity must be positive");
}

void TrainingBuffer::push(const SlotObservation& obs) {
  validate(obs);
  observations_.push_back(obs);
  while (observations_.size() > capacity_) observations_.pop_front();
}

TrainingBuffer push_observation(TrainingBuffer buf, const SlotObservation& obs) {
  buf.push(obs);
  return buf;
}

namespace {

void require_count(std::size_t n, const FitOptions& opts) {
  if (n < opts.min_obs || n < 2) {
    throw Error(ErrorCode::kInsufficientData,
                fmt::format("{} observations, at least {} required", n, std::max<std::size_t>(opts.min_obs, 2)));
  }
}

struct LinearFit {
  Eigen::VectorXd coef;     // one entry per column, zero where dropped
  double intercept = 0.0;
  std::vector<bool> kept;
  bool ridge = false;
  double residual_std = 0.0;
};

// Least squares with intercept. Columns are centred and scaled so the normal
// matrix is a correlation matrix; dependence is then found by a Cholesky
// factorisation that visits columns in `order` and skips any whose remaining
// pivot falls below tolerance. A column that vanishes after centring is
// collinear with the intercept and is folded into it.
LinearFit centred_least_squares(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                std::span<const int> order, const FitOptions& opts) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  const Eigen::RowVectorXd means = x.colwise().mean();
  const double y_mean = y.mean();
  Eigen::MatrixXd xc = x.rowwise() - means;
  const Eigen::VectorXd yc = y.array() - y_mean;

  LinearFit fit;
  fit.coef = Eigen::VectorXd::Zero(p);
  fit.kept.assign(static_cast<std::size_t>(p), false);

  Eigen::VectorXd scale = Eigen::VectorXd::Ones(p);
  std::vector<int> candidates;
  for (int j : order) {
    const double raw = x.col(j).norm();
    const double centred = xc.col(j).norm();
    if (raw == 0.0 || centred <= 1e-9 * raw) continue;
    scale(j) = centred;
    candidates.push_back(j);
  }
  for (int j : candidates) xc.col(j) /= scale(j);

  // Ordered pivoted Cholesky on the correlation matrix.
  std::vector<int> chosen;
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(p, p);
  for (int j : candidates) {
    Eigen::VectorXd row(static_cast<Eigen::Index>(chosen.size()));
    double pivot = xc.col(j).squaredNorm();
    for (std::size_t k = 0; k < chosen.size(); ++k) {
      double v = xc.col(chosen[k]).dot(xc.col(j));
      for (std::size_t m = 0; m < k; ++m) v -= l(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(m)) * row(static_cast<Eigen::Index>(m));
      v /= l(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
      row(static_cast<Eigen::Index>(k)) = v;
      pivot -= v * v;
    }
    if (pivot <= opts.rank_tolerance) continue;
    const auto idx = static_cast<Eigen::Index>(chosen.size());
    for (Eigen::Index k = 0; k < idx; ++k) l(idx, k) = row(k);
    l(idx, idx) = std::sqrt(pivot);
    chosen.push_back(j);
  }

  if (!chosen.empty()) {
    const auto q = static_cast<Eigen::Index>(chosen.size());
    Eigen::MatrixXd z(n, q);
    for (Eigen::Index k = 0; k < q; ++k) z.col(k) = xc.col(chosen[static_cast<std::size_t>(k)]);
    Eigen::MatrixXd normal = z.transpose() * z;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(normal, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (lo <= 0.0 || hi / lo > opts.max_condition) {
      normal.diagonal().array() += opts.ridge_penalty;
      fit.ridge = true;
    }
    const Eigen::LLT<Eigen::MatrixXd> llt(normal);
    Eigen::VectorXd b = llt.solve(z.transpose() * yc);
    // One step of iterative refinement recovers digits lost to squaring the
    // condition number.
    b += llt.solve(z.transpose() * (yc - z * b));

    for (Eigen::Index k = 0; k < q; ++k) {
      const int j = chosen[static_cast<std::size_t>(k)];
      fit.coef(j) = b(k) / scale(j);
      fit.kept[static_cast<std::size_t>(j)] = true;
    }
  }
  fit.intercept = y_mean - means.dot(fit.coef);

  const Eigen::VectorXd resid = (y - x * fit.coef).array() - fit.intercept;
  const double dof = std::max<double>(1.0, static_cast<double>(n) - static_cast<double>(chosen.size()) - 1.0);
  fit.residual_std = std::sqrt(resid.squaredNorm() / dof);
  return fit;
}

}  // namespace

VelocityModel fit_velocity(std::span<const SlotObservation> obs, const FitOptions& opts) {
  require_count(obs.size(), opts);
  const auto n = static_cast<double>(obs.size());
  double x_mean = 0.0;
  double y_mean = 0.0;
  for (const auto& o : obs) {
    x_mean += o.a_mean * o.dt;
    y_mean += o.v_end - o.v_prev;
  }
  x_mean /= n;
  y_mean /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (const auto& o : obs) {
    const double dx = o.a_mean * o.dt - x_mean;
    sxx += dx * dx;
    sxy += dx * (o.v_end - o.v_prev - y_mean);
  }
  if (sxx / n <= opts.min_regressor_variance) {
    throw Error(ErrorCode::kDegenerateDesign, "no spread in a*dt across the training buffer");
  }
  VelocityModel m;
  m.beta = sxy / sxx;
  m.mu = y_mean - m.beta * x_mean;
  double ssr = 0.0;
  for (const auto& o : obs) {
    const double r = o.v_end - o.v_prev - m.beta * o.a_mean * o.dt - m.mu;
    ssr += r * r;
  }
  m.residual_std = std::sqrt(ssr / std::max(1.0, n - 2.0));
  return m;
}

VelocityModel fit_velocity(const TrainingBuffer& buf, const FitOptions& opts) {
  const auto obs = buf.snapshot();
  return fit_velocity(obs, opts);
}

DistanceModel fit_distance(std::span<const SlotObservation> obs, const FitOptions& opts) {
  require_count(obs.size(), opts);
  const auto n = static_cast<Eigen::Index>(obs.size());
  Eigen::MatrixXd x(n, 4);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& o = obs[static_cast<std::size_t>(i)];
    x(i, 0) = o.v_prev * o.dt;
    x(i, 1) = 0.5 * o.a_mean * o.dt * o.dt;
    x(i, 2) = o.dt * o.dt;
    x(i, 3) = o.dt;
    y(i) = o.g_dist;
  }
  // Kinematic terms first, then dt before dt^2.
  static constexpr std::array<int, 4> kOrder{0, 1, 3, 2};
  const auto fit = centred_least_squares(x, y, kOrder, opts);

  static constexpr std::array<const char*, 4> kNames{"lambda1", "lambda2", "lambda3", "lambda4"};
  DistanceModel m;
  for (std::size_t j = 0; j < 4; ++j) {
    m.lambda[j] = fit.coef(static_cast<Eigen::Index>(j));
    if (!fit.kept[j]) m.folded_columns.emplace_back(kNames[j]);
  }
  m.eta = fit.intercept;
  m.residual_std = fit.residual_std;
  m.ridge = fit.ridge;
  return m;
}

DistanceModel fit_distance(const TrainingBuffer& buf, const FitOptions& opts) {
  const auto obs = buf.snapshot();
  return fit_distance(obs, opts);
}

double predict_velocity(const VelocityModel& m, double v_prev, double a_mean, double dt) {
  return std::max(0.0, v_prev + m.beta * a_mean * dt + m.mu);
}

double predict_distance(const DistanceModel& m, double v_prev, double a_mean, double dt) {
  const double g = m.lambda[0] * v_prev * dt + m.lambda[1] * 0.5 * a_mean * dt * dt + m.lambda[2] * dt * dt +
                   m.lambda[3] * dt + m.eta;
  return std::max(0.0, g);
}

VelocityModel kinematic_velocity_model() { return {}; }
DistanceModel kinematic_distance_model() { return {}; }

nlohmann::json to_json(const ModelPair& models) {
  const auto& d = models.distance;
  return nlohmann::json{
      {"beta", models.velocity.beta},
      {"mu", models.velocity.mu},
      {"lambda", {d.lambda[0], d.lambda[1], d.lambda[2], d.lambda[3]}},
      {"eta", d.eta},
      {"residual_std", d.residual_std},
      {"folded_columns", d.folded_columns},
  };
}

ModelPair models_from_json(const nlohmann::json& j) {
  try {
    ModelPair m;
    m.velocity.beta = j.at("beta").get<double>();
    m.velocity.mu = j.at("mu").get<double>();
    const auto& lam = j.at("lambda");
    if (!lam.is_array() || lam.size() != 4) throw Error(ErrorCode::kParse, "\"lambda\" must hold 4 numbers");
    for (std::size_t i = 0; i < 4; ++i) m.distance.lambda[i] = lam[i].get<double>();
    m.distance.eta = j.at("eta").get<double>();
    m.distance.residual_std = j.at("residual_std").get<double>();
    if (j.contains("folded_columns")) m.distance.folded_columns = j["folded_columns"].get<std::vector<std::string>>();
    if (m.distance.residual_std < 0.0) throw Error(ErrorCode::kInvalidValue, "residual_std must be non-negative");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, e.what());
  }
}

void save_models(const std::filesystem::path& path, const ModelPair& models) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, fmt::format("cannot write {}", path.string()));
  out << to_json(models).dump(2) << '\n';
}

ModelPair load_models(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, fmt::format("cannot open {}", path.string()));
  try {
    return models_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParse, e.what());
  }
}

}  // namespace drnav
