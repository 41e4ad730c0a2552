#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "hybridsens/cli.hpp"

namespace hybridsens::cli {

using nlohmann::json;

namespace {

class Parser {
 public:
  explicit Parser(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const std::string& path, const std::string& msg) const {
    raise(ErrorKind::kConfigError, source_ + ": field '" + path + "': " + msg);
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

  void allow_keys(const json& obj, const std::string& path,
                  std::initializer_list<const char*> keys) const {
    if (!obj.is_object()) fail(path.empty() ? "<root>" : path, "expected an object");
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [key, value] : obj.items()) {
      if (!allowed.count(key)) fail(join(path, key), "unknown field");
    }
  }

  const json* find(const json& obj, const std::string& key) const {
    const auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
  }

  double number(const json& j, const std::string& path) const {
    if (!j.is_number()) fail(path, "expected a number");
    return j.get<double>();
  }

  double number(const json& obj, const std::string& path, const std::string& key,
                double fallback) const {
    const json* j = find(obj, key);
    return j ? number(*j, join(path, key)) : fallback;
  }

  std::string string(const json& j, const std::string& path) const {
    if (!j.is_string()) fail(path, "expected a string");
    return j.get<std::string>();
  }

  Vector vector(const json& j, const std::string& path,
                std::optional<Eigen::Index> size = std::nullopt) const {
    if (!j.is_array()) fail(path, "expected an array of numbers");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
      v[static_cast<Eigen::Index>(i)] =
          number(j[i], path + "[" + std::to_string(i) + "]");
    }
    if (size && v.size() != *size) {
      fail(path, "expected " + std::to_string(*size) + " entries, got " +
                     std::to_string(v.size()));
    }
    return v;
  }

  /// Array of rows, or a number meaning that multiple of the identity.
  Matrix matrix(const json& j, const std::string& path,
                std::optional<Eigen::Index> rows = std::nullopt,
                std::optional<Eigen::Index> cols = std::nullopt) const {
    if (j.is_number()) {
      if (!rows || !cols || *rows != *cols) {
        fail(path, "a scalar is only accepted for square matrices");
      }
      return number(j, path) * Matrix::Identity(*rows, *cols);
    }
    if (!j.is_array()) fail(path, "expected a matrix (array of rows)");
    const auto r = static_cast<Eigen::Index>(j.size());
    Eigen::Index c = cols.value_or(r > 0 && j[0].is_array()
                                       ? static_cast<Eigen::Index>(j[0].size())
                                       : 0);
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
      const Vector row = vector(j[static_cast<std::size_t>(i)],
                                path + "[" + std::to_string(i) + "]", c);
      m.row(i) = row.transpose();
    }
    if (rows && r != *rows) {
      fail(path, "expected " + std::to_string(*rows) + " rows, got " +
                     std::to_string(r));
    }
    return m;
  }

  SignalSpec signal(const json* j, const std::string& path, int dim) const {
    SignalSpec spec;
    if (!j) return spec;
    allow_keys(*j, path, {"type", "value"});
    const json* type = find(*j, "type");
    spec.kind = type ? string(*type, join(path, "type")) : "zero";
    if (spec.kind == "constant") {
      const json* value = find(*j, "value");
      if (!value) fail(join(path, "value"), "required for a constant signal");
      spec.value = vector(*value, join(path, "value"), dim);
    } else if (spec.kind != "zero") {
      fail(join(path, "type"), "expected 'zero' or 'constant'");
    }
    return spec;
  }

  models::ModelCatalogEntry model(const json& j, double t1) const {
    const json* name_j = find(j, "name");
    if (!name_j) fail("model.name", "required");
    const std::string name = string(*name_j, "model.name");
    try {
      if (name == "bouncing_ball") {
        allow_keys(j, "model", {"name", "gravity", "restitution", "drop_height"});
        models::BouncingBallParams p;
        p.gravity = number(j, "model", "gravity", p.gravity);
        p.restitution = number(j, "model", "restitution", p.restitution);
        p.drop_height = number(j, "model", "drop_height", p.drop_height);
        p.t1 = t1;
        return models::bouncing_ball(p);
      }
      if (name == "switched_linear") {
        allow_keys(j, "model", {"name", "damping", "A_ante", "A_post", "B_ante",
                                "B_post", "normal", "offset"});
        auto p = models::rotation_to_damped_rotation(
            number(j, "model", "damping", 0.5));
        if (const json* a = find(j, "A_ante")) {
          p.A_ante = matrix(*a, "model.A_ante");
          const auto n = p.A_ante.rows();
          if (p.A_ante.cols() != n) fail("model.A_ante", "must be square");
          const json* ap = find(j, "A_post");
          if (!ap) fail("model.A_post", "required with A_ante");
          p.A_post = matrix(*ap, "model.A_post", n, n);
          const json* normal = find(j, "normal");
          if (!normal) fail("model.normal", "required with A_ante");
          p.normal = vector(*normal, "model.normal", n);
          p.offset = number(j, "model", "offset", 0.0);
          p.B_ante = p.B_post = Matrix();
          if (const json* b = find(j, "B_ante")) p.B_ante = matrix(*b, "model.B_ante", n);
          if (const json* b = find(j, "B_post")) p.B_post = matrix(*b, "model.B_post", n);
          p.facts = {};
          p.x0 = Vector::Zero(n);
        }
        return models::switched_linear(p);
      }
      if (name == "moving_wall_ball") {
        allow_keys(j, "model", {"name", "gravity", "restitution", "drop_height",
                                "wall"});
        models::Wall wall = models::Wall::fixed();
        if (const json* w = find(j, "wall")) {
          allow_keys(*w, "model.wall", {"type", "amplitude", "frequency"});
          const json* type = find(*w, "type");
          const std::string kind = type ? string(*type, "model.wall.type") : "fixed";
          if (kind == "sinusoid") {
            wall = models::Wall::sinusoid(number(*w, "model.wall", "amplitude", 0.1),
                                          number(*w, "model.wall", "frequency", 1.0));
          } else if (kind != "fixed") {
            fail("model.wall.type", "expected 'fixed' or 'sinusoid'");
          }
        }
        return models::moving_wall_ball(number(j, "model", "gravity", 9.81),
                                        number(j, "model", "restitution", 1.0),
                                        wall, number(j, "model", "drop_height", 1.0),
                                        t1);
      }
      if (name == "smooth_scalar") {
        allow_keys(j, "model", {"name"});
        return models::smooth_scalar();
      }
    } catch (const HybridError& e) {
      if (e.kind() == ErrorKind::kConfigError) throw;
      fail("model", e.what());
    }
    fail("model.name", "unknown model '" + name + "'");
  }

 private:
  std::string source_;
};

std::string line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace

InputSignal SignalSpec::build(int dim, const TimeSpan& span) const {
  if (kind == "constant") return InputSignal::constant(value, span.t0, span.t1);
  return InputSignal::zero(dim, span.t0, span.t1);
}

RunConfig parse_config(const std::string& text, const std::string& source) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    raise(ErrorKind::kConfigError,
          source + ": syntax error at " + line_column(text, e.byte) + ": " +
              e.what());
  }
  const Parser p(source);
  p.allow_keys(root, "", {"model", "x0", "span", "input", "integration",
                          "perturbation", "lqr", "tracking"});

  RunConfig cfg;
  cfg.source = source;
  if (const json* span = p.find(root, "span")) {
    const Vector s = p.vector(*span, "span", 2);
    cfg.span = {s[0], s[1]};
    if (!(s[1] > s[0])) p.fail("span", "expected [t0, t1] with t1 > t0");
  }
  const json* model = p.find(root, "model");
  if (!model) p.fail("model", "required");
  if (!model->is_object()) p.fail("model", "expected an object");
  const double t1_hint = p.find(root, "span") ? cfg.span.t1 : 1.0;
  auto entry = std::make_shared<models::ModelCatalogEntry>(p.model(*model, t1_hint));
  cfg.model_name = entry->name;
  if (!p.find(root, "span")) cfg.span = entry->span;
  cfg.model = entry;
  const Eigen::Index n = entry->system.n_state();
  const int m = entry->system.n_input();

  const json* x0 = p.find(root, "x0");
  if (!x0) p.fail("x0", "required");
  cfg.x0 = p.vector(*x0, "x0", n);
  cfg.input = p.signal(p.find(root, "input"), "input", m);

  if (const json* integ = p.find(root, "integration")) {
    p.allow_keys(*integ, "integration",
                 {"step", "event_tolerance", "time_tolerance",
                  "transversality_tolerance"});
    auto& o = cfg.integration;
    o.step = p.number(*integ, "integration", "step", o.step);
    o.event_tolerance =
        p.number(*integ, "integration", "event_tolerance", o.event_tolerance);
    o.time_tolerance =
        p.number(*integ, "integration", "time_tolerance", o.time_tolerance);
    o.transversality_tolerance = p.number(*integ, "integration",
                                          "transversality_tolerance",
                                          o.transversality_tolerance);
    if (o.step < 0.0) p.fail("integration.step", "must be >= 0");
  }

  cfg.z0 = Vector::Zero(n);
  cfg.eps = {1e-2, 3e-3, 1e-3, 3e-4, 1e-4};
  if (const json* pert = p.find(root, "perturbation")) {
    p.allow_keys(*pert, "perturbation", {"z0", "v", "eps"});
    if (const json* z0 = p.find(*pert, "z0")) cfg.z0 = p.vector(*z0, "perturbation.z0", n);
    cfg.v = p.signal(p.find(*pert, "v"), "perturbation.v", m);
    if (const json* eps = p.find(*pert, "eps")) {
      const Vector e = p.vector(*eps, "perturbation.eps");
      if (e.size() == 0) p.fail("perturbation.eps", "must not be empty");
      cfg.eps.assign(e.data(), e.data() + e.size());
      for (std::size_t i = 0; i < cfg.eps.size(); ++i) {
        if (!(cfg.eps[i] > 0.0)) {
          p.fail("perturbation.eps[" + std::to_string(i) + "]", "must be positive");
        }
        if (i > 0 && !(cfg.eps[i] < cfg.eps[i - 1])) {
          p.fail("perturbation.eps[" + std::to_string(i) + "]",
                 "eps list must be strictly decreasing");
        }
      }
    }
  }

  cfg.Q = Matrix::Identity(n, n);
  cfg.R = Matrix::Identity(m, m);
  cfg.P_T = Matrix::Identity(n, n);
  cfg.horizon = cfg.span.t1;
  if (const json* lqr = p.find(root, "lqr")) {
    p.allow_keys(*lqr, "lqr", {"Q", "R", "P_T", "horizon", "step",
                               "blowup_threshold"});
    if (const json* q = p.find(*lqr, "Q")) cfg.Q = p.matrix(*q, "lqr.Q", n, n);
    if (const json* r = p.find(*lqr, "R")) cfg.R = p.matrix(*r, "lqr.R", m, m);
    if (const json* pt = p.find(*lqr, "P_T")) cfg.P_T = p.matrix(*pt, "lqr.P_T", n, n);
    cfg.horizon = p.number(*lqr, "lqr", "horizon", cfg.horizon);
    cfg.riccati.step = p.number(*lqr, "lqr", "step", cfg.riccati.step);
    cfg.riccati.blowup_threshold =
        p.number(*lqr, "lqr", "blowup_threshold", cfg.riccati.blowup_threshold);
    if (!(cfg.horizon > cfg.span.t0) || cfg.horizon > cfg.span.t1) {
      p.fail("lqr.horizon", "must lie in (t0, t1]");
    }
  }

  cfg.delta = Vector::Zero(n);
  if (const json* tr = p.find(root, "tracking")) {
    p.allow_keys(*tr, "tracking", {"delta", "policy", "random_trials"});
    if (const json* d = p.find(*tr, "delta")) cfg.delta = p.vector(*d, "tracking.delta", n);
    if (const json* pol = p.find(*tr, "policy")) {
      const std::string name = p.string(*pol, "tracking.policy");
      if (name != "detection" && name != "min_norm") {
        p.fail("tracking.policy", "expected 'detection' or 'min_norm'");
      }
      cfg.policy = parse_switching_policy(name);
    }
    const double trials = p.number(*tr, "tracking", "random_trials", 0.0);
    if (trials < 0 || trials != static_cast<int>(trials)) {
      p.fail("tracking.random_trials", "expected a non-negative integer");
    }
    cfg.random_trials = static_cast<int>(trials);
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::kConfigError, "cannot open config " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return parse_config(os.str(), path.string());
}

}  // namespace hybridsens::cli
