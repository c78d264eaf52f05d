#include "lmft/covfn.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace lmft {

CovExpr CovExpr::cn(Param c) { return CovExpr{Kind::CN, {}, c, {}}; }
CovExpr CovExpr::rbf(Param l) { return CovExpr{Kind::RBF, {}, l, {}}; }
CovExpr CovExpr::wn(Param eps) { return CovExpr{Kind::WN, {}, eps, {}}; }
CovExpr CovExpr::ss(Param p, Param l) { return CovExpr{Kind::SS, {}, p, l}; }

CovExpr CovExpr::sum(std::vector<CovExpr> terms) {
  return CovExpr{Kind::Sum, std::move(terms), {}, {}};
}

CovExpr CovExpr::prod(std::vector<CovExpr> factors) {
  return CovExpr{Kind::Prod, std::move(factors), {}, {}};
}

namespace {

void check_param(const Param& p, const char* what) {
  if (!(p.value > 0.0) || !std::isfinite(p.value)) {
    throw std::invalid_argument(std::string("covariance parameter ") + what +
                                " must be a positive finite real");
  }
}

template <typename Node>
void visit_postorder(const CovExpr& e, Node&& node) {
  for (const CovExpr& c : e.children) visit_postorder(c, node);
  node(e);
}

}  // namespace

void CovExpr::validate() const {
  switch (kind) {
    case Kind::Sum:
    case Kind::Prod:
      if (children.size() < 2) {
        throw std::invalid_argument("Sum/Prod need at least 2 children");
      }
      for (const CovExpr& c : children) c.validate();
      break;
    case Kind::CN:
      check_param(a, "c");
      break;
    case Kind::RBF:
      check_param(a, "l");
      break;
    case Kind::WN:
      check_param(a, "eps");
      break;
    case Kind::SS:
      check_param(a, "p");
      check_param(b, "l");
      break;
  }
}

int CovExpr::free_count() const {
  int n = 0;
  for (const CovExpr& c : children) n += c.free_count();
  if (kind != Kind::Sum && kind != Kind::Prod) {
    n += a.is_free ? 1 : 0;
    if (kind == Kind::SS) n += b.is_free ? 1 : 0;
  }
  return n;
}

std::vector<double> CovExpr::free_values() const {
  std::vector<double> out;
  visit_postorder(*this, [&out](const CovExpr& e) {
    if (e.kind == Kind::Sum || e.kind == Kind::Prod) return;
    if (e.a.is_free) out.push_back(e.a.value);
    if (e.kind == Kind::SS && e.b.is_free) out.push_back(e.b.value);
  });
  return out;
}

std::vector<std::string> CovExpr::free_names() const {
  std::vector<std::string> out;
  visit_postorder(*this, [&out](const CovExpr& e) {
    switch (e.kind) {
      case Kind::Sum:
      case Kind::Prod:
        break;
      case Kind::CN:
        if (e.a.is_free) out.push_back("cn.c");
        break;
      case Kind::RBF:
        if (e.a.is_free) out.push_back("rbf.l");
        break;
      case Kind::WN:
        if (e.a.is_free) out.push_back("wn.eps");
        break;
      case Kind::SS:
        if (e.a.is_free) out.push_back("ss.p");
        if (e.b.is_free) out.push_back("ss.l");
        break;
    }
  });
  return out;
}

namespace {

void set_free_rec(CovExpr& e, const std::vector<double>& values, size_t& idx) {
  for (CovExpr& c : e.children) set_free_rec(c, values, idx);
  if (e.kind == CovExpr::Kind::Sum || e.kind == CovExpr::Kind::Prod) return;
  if (e.a.is_free) e.a.value = values.at(idx++);
  if (e.kind == CovExpr::Kind::SS && e.b.is_free) e.b.value = values.at(idx++);
}

}  // namespace

void CovExpr::set_free_values(const std::vector<double>& values) {
  if (values.size() != static_cast<size_t>(free_count())) {
    throw std::invalid_argument("set_free_values: length mismatch");
  }
  size_t idx = 0;
  set_free_rec(*this, values, idx);
}

bool CovExpr::has_wn() const {
  if (kind == Kind::WN) return true;
  for (const CovExpr& c : children) {
    if (c.has_wn()) return true;
  }
  return false;
}

namespace {

using Eigen::MatrixXd;

struct Eval {
  MatrixXd K;
  std::vector<MatrixXd> grads;  // dK/d(log theta), postorder free params
};

// D: pairwise absolute distances; Id: 1 where WN applies (index identity).
Eval eval_rec(const CovExpr& e, const MatrixXd& D, const MatrixXd& Id,
              bool include_wn, bool want_grads) {
  constexpr double pi = std::numbers::pi;
  Eval out;
  switch (e.kind) {
    case CovExpr::Kind::CN: {
      out.K = MatrixXd::Constant(D.rows(), D.cols(), e.a.value);
      if (want_grads && e.a.is_free) out.grads.push_back(out.K);
      return out;
    }
    case CovExpr::Kind::RBF: {
      const double l = e.a.value;
      MatrixXd D2 = D.array().square();
      out.K = (-D2.array() / (2.0 * l * l)).exp();
      if (want_grads && e.a.is_free) {
        out.grads.push_back(out.K.cwiseProduct(D2 / (l * l)));
      }
      return out;
    }
    case CovExpr::Kind::WN: {
      const double eps = include_wn ? e.a.value : 0.0;
      out.K = eps * Id;
      if (want_grads && e.a.is_free) out.grads.push_back(out.K);
      return out;
    }
    case CovExpr::Kind::SS: {
      const double p = e.a.value;
      const double l = e.b.value;
      MatrixXd phase = (pi / p) * D;
      MatrixXd s = phase.array().sin();
      out.K = (-2.0 * s.array().square() / (l * l)).exp();
      if (want_grads) {
        if (e.a.is_free) {
          MatrixXd c = phase.array().cos();
          MatrixXd g = out.K.array() * (4.0 * pi / (l * l * p)) * D.array() *
                       s.array() * c.array();
          out.grads.push_back(std::move(g));
        }
        if (e.b.is_free) {
          MatrixXd g = out.K.array() * (4.0 / (l * l)) * s.array().square();
          out.grads.push_back(std::move(g));
        }
      }
      return out;
    }
    case CovExpr::Kind::Sum: {
      out.K = MatrixXd::Zero(D.rows(), D.cols());
      for (const CovExpr& c : e.children) {
        Eval child = eval_rec(c, D, Id, include_wn, want_grads);
        out.K += child.K;
        for (MatrixXd& g : child.grads) out.grads.push_back(std::move(g));
      }
      return out;
    }
    case CovExpr::Kind::Prod: {
      std::vector<Eval> evals;
      evals.reserve(e.children.size());
      for (const CovExpr& c : e.children) {
        evals.push_back(eval_rec(c, D, Id, include_wn, want_grads));
      }
      out.K = MatrixXd::Ones(D.rows(), D.cols());
      for (const Eval& ev : evals) out.K = out.K.cwiseProduct(ev.K);
      if (want_grads) {
        for (size_t m = 0; m < evals.size(); ++m) {
          if (evals[m].grads.empty()) continue;
          MatrixXd others = MatrixXd::Ones(D.rows(), D.cols());
          for (size_t j = 0; j < evals.size(); ++j) {
            if (j != m) others = others.cwiseProduct(evals[j].K);
          }
          for (const MatrixXd& g : evals[m].grads) {
            out.grads.push_back(others.cwiseProduct(g));
          }
        }
      }
      return out;
    }
  }
  throw std::logic_error("unreachable");
}

MatrixXd pairwise_dist(const Eigen::VectorXd& X) {
  const Eigen::Index n = X.size();
  MatrixXd D(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) D(i, j) = std::abs(X[i] - X[j]);
  }
  return D;
}

}  // namespace

double cov_eval(const CovExpr& expr, double x, double x_p) {
  expr.validate();
  MatrixXd D(1, 1);
  D(0, 0) = std::abs(x - x_p);
  MatrixXd Id(1, 1);
  Id(0, 0) = (x == x_p) ? 1.0 : 0.0;
  return eval_rec(expr, D, Id, true, false).K(0, 0);
}

CovContext CovContext::from_points(const Eigen::VectorXd& X) {
  if (X.size() == 0) throw std::invalid_argument("CovContext: empty X");
  return CovContext{pairwise_dist(X), MatrixXd::Identity(X.size(), X.size())};
}

Eigen::MatrixXd cov_matrix(const CovExpr& expr, const CovContext& ctx) {
  MatrixXd K = eval_rec(expr, ctx.D, ctx.Id, true, false).K;
  // Enforce exact symmetry against roundoff asymmetry in the leaf formulas.
  return ((K + K.transpose()) / 2.0).eval();
}

std::vector<Eigen::MatrixXd> cov_grad(const CovExpr& expr,
                                      const CovContext& ctx) {
  if (expr.free_count() == 0) {
    throw std::invalid_argument("cov_grad: expression has no free parameter");
  }
  return eval_rec(expr, ctx.D, ctx.Id, true, true).grads;
}

Eigen::MatrixXd cov_matrix(const CovExpr& expr, const Eigen::VectorXd& X) {
  expr.validate();
  return cov_matrix(expr, CovContext::from_points(X));
}

std::vector<Eigen::MatrixXd> cov_grad(const CovExpr& expr,
                                      const Eigen::VectorXd& X) {
  expr.validate();
  return cov_grad(expr, CovContext::from_points(X));
}

double cov_diag_value(const CovExpr& expr, bool include_wn) {
  MatrixXd D = MatrixXd::Zero(1, 1);
  MatrixXd Id = MatrixXd::Ones(1, 1);
  return eval_rec(expr, D, Id, include_wn, false).K(0, 0);
}

std::vector<double> cov_diag_grad(const CovExpr& expr, bool include_wn) {
  MatrixXd D = MatrixXd::Zero(1, 1);
  MatrixXd Id = MatrixXd::Ones(1, 1);
  Eval ev = eval_rec(expr, D, Id, include_wn, true);
  std::vector<double> out;
  out.reserve(ev.grads.size());
  for (const MatrixXd& g : ev.grads) out.push_back(g(0, 0));
  return out;
}

Eigen::VectorXd noise_diagonal(const CovExpr& expr, const Eigen::VectorXd& X) {
  const double d = cov_diag_value(expr, true) - cov_diag_value(expr, false);
  return Eigen::VectorXd::Constant(X.size(), d);
}

namespace {

nlohmann::json param_to_json(const Param& p) {
  return p.is_free ? nlohmann::json{{"free", p.value}}
                   : nlohmann::json{{"fixed", p.value}};
}

Param param_from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.size() != 1) {
    throw std::invalid_argument(
        "covariance parameter must be {\"fixed\": v} or {\"free\": v}");
  }
  if (j.contains("fixed")) return Param::fixed(j.at("fixed").get<double>());
  if (j.contains("free")) return Param::free_seed(j.at("free").get<double>());
  throw std::invalid_argument("covariance parameter key must be fixed or free");
}

}  // namespace

nlohmann::json covexpr_to_json(const CovExpr& expr) {
  using nlohmann::json;
  switch (expr.kind) {
    case CovExpr::Kind::Sum:
    case CovExpr::Kind::Prod: {
      json arr = json::array();
      for (const CovExpr& c : expr.children) arr.push_back(covexpr_to_json(c));
      return json{{expr.kind == CovExpr::Kind::Sum ? "sum" : "prod", arr}};
    }
    case CovExpr::Kind::CN:
      return json{{"cn", param_to_json(expr.a)}};
    case CovExpr::Kind::RBF:
      return json{{"rbf", param_to_json(expr.a)}};
    case CovExpr::Kind::WN:
      return json{{"wn", param_to_json(expr.a)}};
    case CovExpr::Kind::SS:
      return json{{"ss", {{"p", param_to_json(expr.a)},
                          {"l", param_to_json(expr.b)}}}};
  }
  throw std::logic_error("unreachable");
}

CovExpr covexpr_from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.size() != 1) {
    throw std::invalid_argument("covariance node must have exactly one key");
  }
  const std::string key = j.begin().key();
  const nlohmann::json& v = j.begin().value();
  if (key == "sum" || key == "prod") {
    std::vector<CovExpr> children;
    for (const nlohmann::json& c : v) children.push_back(covexpr_from_json(c));
    CovExpr e = key == "sum" ? CovExpr::sum(std::move(children))
                             : CovExpr::prod(std::move(children));
    e.validate();
    return e;
  }
  CovExpr e;
  if (key == "cn") {
    e = CovExpr::cn(param_from_json(v));
  } else if (key == "rbf") {
    e = CovExpr::rbf(param_from_json(v));
  } else if (key == "wn") {
    e = CovExpr::wn(param_from_json(v));
  } else if (key == "ss") {
    if (!v.is_object() || v.size() != 2 || !v.contains("p") || !v.contains("l")) {
      throw std::invalid_argument("ss node requires exactly keys p and l");
    }
    e = CovExpr::ss(param_from_json(v.at("p")), param_from_json(v.at("l")));
  } else {
    throw std::invalid_argument("unknown covariance node: " + key);
  }
  e.validate();
  return e;
}

}  // namespace lmft
