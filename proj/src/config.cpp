#include "radtomo/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "radtomo/errors.hpp"

namespace radtomo {

namespace {

std::string trim(const std::string& s) {
  const auto from = s.find_first_not_of(" \t\r");
  if (from == std::string::npos) return "";
  const auto to = s.find_last_not_of(" \t\r");
  return s.substr(from, to - from + 1);
}

std::string format_full(Scalar v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct Entry {
  std::string value;
  int line;
};

class ParsedFile {
 public:
  ParsedFile(std::istream& in, std::string name) : name_(std::move(name)) {
    static const std::map<std::string, std::set<std::string>> kSchema = {
        {"grid", {"n", "radius"}},
        {"quadrature", {"n_dir"}},
        {"phantom",
         {"mu_background", "sigma_background", "mu_inclusion", "sigma_inclusion"}},
        {"sources", {"count", "arc_fraction", "amplitude", "offset_deg"}},
        {"detectors", {"count", "arc_fraction", "offset_deg"}},
        {"regularization",
         {"mu_prior", "sigma_prior", "mu_max", "sigma_max", "alpha0", "alpha_min", "alpha_pgn",
          "rate_alphas"}},
        {"solver",
         {"rtol", "max_iter", "cg_tol", "cg_max", "step_tol", "max_outer", "seed", "out_dir",
          "break_adjoint"}},
    };

    std::string section;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto comment = line.find_first_of("#;");
      if (comment != std::string::npos) line.erase(comment);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') fail(lineno, "malformed section header '" + line + "'");
        section = trim(line.substr(1, line.size() - 2));
        if (!kSchema.count(section)) fail(lineno, "unknown section [" + section + "]");
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) fail(lineno, "expected key = value, got '" + line + "'");
      if (section.empty()) fail(lineno, "key outside of any section");
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (!kSchema.at(section).count(key))
        fail(lineno, "unknown key '" + key + "' in [" + section + "]");
      entries_[section + "." + key].push_back({value, lineno});
    }
  }

  [[noreturn]] void fail(int line, const std::string& msg) const {
    throw ConfigError(name_ + ":" + std::to_string(line) + ": " + msg);
  }

  const std::vector<Entry>* find(const std::string& path) const {
    const auto it = entries_.find(path);
    return it == entries_.end() ? nullptr : &it->second;
  }

  const Entry* find_single(const std::string& path) const {
    const auto* list = find(path);
    if (!list) return nullptr;
    if (list->size() > 1) fail(list->back().line, "duplicate key '" + path + "'");
    return &list->front();
  }

  void get(const std::string& path, Scalar& out) const {
    if (const Entry* e = find_single(path)) out = parse_scalar(*e, path);
  }

  void get(const std::string& path, int& out) const {
    if (const Entry* e = find_single(path)) {
      try {
        size_t pos = 0;
        out = std::stoi(e->value, &pos);
        if (pos != e->value.size()) throw std::invalid_argument(e->value);
      } catch (const std::exception&) {
        fail(e->line, "expected an integer for '" + path + "', got '" + e->value + "'");
      }
    }
  }

  void get(const std::string& path, unsigned& out) const {
    int v = static_cast<int>(out);
    get(path, v);
    if (const Entry* e = find_single(path); e && v < 0)
      fail(e->line, "'" + path + "' must be non-negative");
    out = static_cast<unsigned>(v);
  }

  void get(const std::string& path, bool& out) const {
    if (const Entry* e = find_single(path)) {
      if (e->value == "true" || e->value == "1")
        out = true;
      else if (e->value == "false" || e->value == "0")
        out = false;
      else
        fail(e->line, "expected true/false for '" + path + "', got '" + e->value + "'");
    }
  }

  void get(const std::string& path, std::string& out) const {
    if (const Entry* e = find_single(path)) out = e->value;
  }

  void get(const std::string& path, std::vector<Scalar>& out) const {
    if (const Entry* e = find_single(path)) {
      std::vector<Scalar> values;
      std::istringstream ss(e->value);
      std::string token;
      while (ss >> token) values.push_back(parse_scalar({token, e->line}, path));
      if (values.empty()) fail(e->line, "empty list for '" + path + "'");
      out = std::move(values);
    }
  }

  void get_inclusions(const std::string& path, std::vector<Inclusion>& out) const {
    const auto* list = find(path);
    if (!list) return;
    std::vector<Inclusion> parsed;
    for (const Entry& e : *list) {
      std::istringstream ss(e.value);
      Inclusion inc;
      if (!(ss >> inc.cx >> inc.cy >> inc.r >> inc.value) || !(ss >> std::ws).eof())
        fail(e.line, "expected 'cx cy r value' for '" + path + "', got '" + e.value + "'");
      parsed.push_back(inc);
    }
    out = std::move(parsed);
  }

 private:
  Scalar parse_scalar(const Entry& e, const std::string& path) const {
    try {
      size_t pos = 0;
      const Scalar v = std::stod(e.value, &pos);
      if (pos != e.value.size()) throw std::invalid_argument(e.value);
      return v;
    } catch (const std::exception&) {
      fail(e.line, "expected a number for '" + path + "', got '" + e.value + "'");
    }
  }

  std::string name_;
  std::map<std::string, std::vector<Entry>> entries_;
};

}  // namespace

ExperimentConfig parse_config(std::istream& in, const std::string& name) {
  const ParsedFile file(in, name);
  ExperimentConfig cfg;
  file.get("grid.n", cfg.n);
  file.get("grid.radius", cfg.radius);
  file.get("quadrature.n_dir", cfg.n_dir);
  file.get("phantom.mu_background", cfg.mu_background);
  file.get("phantom.sigma_background", cfg.sigma_background);
  file.get_inclusions("phantom.mu_inclusion", cfg.mu_inclusions);
  file.get_inclusions("phantom.sigma_inclusion", cfg.sigma_inclusions);
  file.get("sources.count", cfg.source_count);
  file.get("sources.arc_fraction", cfg.source_arc_fraction);
  file.get("sources.amplitude", cfg.source_amplitude);
  file.get("sources.offset_deg", cfg.source_offset_deg);
  file.get("detectors.count", cfg.detector_count);
  file.get("detectors.arc_fraction", cfg.detector_arc_fraction);
  file.get("detectors.offset_deg", cfg.detector_offset_deg);
  file.get("regularization.mu_prior", cfg.mu_prior);
  file.get("regularization.sigma_prior", cfg.sigma_prior);
  file.get("regularization.mu_max", cfg.mu_max);
  file.get("regularization.sigma_max", cfg.sigma_max);
  file.get("regularization.alpha0", cfg.alpha0);
  file.get("regularization.alpha_min", cfg.alpha_min);
  file.get("regularization.alpha_pgn", cfg.alpha_pgn);
  file.get("regularization.rate_alphas", cfg.rate_alphas);
  file.get("solver.rtol", cfg.rtol);
  file.get("solver.max_iter", cfg.max_iter);
  file.get("solver.cg_tol", cfg.cg_tol);
  file.get("solver.cg_max", cfg.cg_max);
  file.get("solver.step_tol", cfg.step_tol);
  file.get("solver.max_outer", cfg.max_outer);
  file.get("solver.seed", cfg.seed);
  file.get("solver.out_dir", cfg.out_dir);
  file.get("solver.break_adjoint", cfg.break_adjoint);
  validate_config(cfg, name);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  return parse_config(in, path);
}

void validate_config(const ExperimentConfig& cfg, const std::string& name) {
  const auto fail = [&](const std::string& msg) { throw ConfigError(name + ": " + msg); };
  if (cfg.n < 4) fail("grid.n must be at least 4");
  if (!(cfg.radius > 0)) fail("grid.radius must be positive");
  if (cfg.n_dir < 4 || cfg.n_dir % 2 != 0) fail("quadrature.n_dir must be even and >= 4");
  if (cfg.mu_background < 0 || cfg.sigma_background < 0)
    fail("phantom backgrounds must be non-negative");
  if (cfg.mu_max < 0 || cfg.sigma_max < 0) fail("parameter bounds must be non-negative");
  for (const auto& inc : cfg.mu_inclusions)
    if (inc.value < 0 || inc.value > cfg.mu_max || inc.r <= 0)
      fail("mu inclusion outside physical range");
  for (const auto& inc : cfg.sigma_inclusions)
    if (inc.value < 0 || inc.value > cfg.sigma_max || inc.r <= 0)
      fail("sigma inclusion outside physical range");
  if (cfg.mu_background > cfg.mu_max || cfg.sigma_background > cfg.sigma_max)
    fail("phantom background exceeds its bound");
  if (cfg.mu_prior < 0 || cfg.mu_prior > cfg.mu_max || cfg.sigma_prior < 0 ||
      cfg.sigma_prior > cfg.sigma_max)
    fail("prior outside of the admissible box");
  if (cfg.source_count < 1 || cfg.detector_count < 1) fail("need at least one source and detector");
  if (cfg.source_arc_fraction <= 0 || cfg.source_arc_fraction > 1 ||
      cfg.detector_arc_fraction <= 0 || cfg.detector_arc_fraction > 1)
    fail("arc fractions must lie in (0, 1]");
  if (cfg.source_amplitude < 0) fail("source amplitude must be non-negative");
  if (!(cfg.alpha0 > cfg.alpha_min) || !(cfg.alpha_min > 0))
    fail("need alpha0 > alpha_min > 0");
  if (cfg.alpha_pgn <= 0) fail("alpha_pgn must be positive");
  if (cfg.rate_alphas.empty()) fail("rate_alphas must not be empty");
  for (size_t i = 0; i + 1 < cfg.rate_alphas.size(); ++i)
    if (!(cfg.rate_alphas[i] > cfg.rate_alphas[i + 1]))
      fail("rate_alphas must be strictly decreasing");
  if (cfg.rate_alphas.back() <= 0) fail("rate_alphas must be positive");
  if (!(cfg.rtol > 0) || cfg.max_iter < 1) fail("invalid forward solver settings");
  if (!(cfg.cg_tol > 0) || cfg.cg_max < 1) fail("invalid cg settings");
  if (!(cfg.step_tol > 0) || cfg.max_outer < 1) fail("invalid outer iteration settings");
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "[grid]\n";
  out << "n = " << cfg.n << "\n";
  out << "radius = " << format_full(cfg.radius) << "\n\n";
  out << "[quadrature]\n";
  out << "n_dir = " << cfg.n_dir << "\n\n";
  out << "[phantom]\n";
  out << "mu_background = " << format_full(cfg.mu_background) << "\n";
  out << "sigma_background = " << format_full(cfg.sigma_background) << "\n";
  for (const auto& inc : cfg.mu_inclusions)
    out << "mu_inclusion = " << format_full(inc.cx) << " " << format_full(inc.cy) << " "
        << format_full(inc.r) << " " << format_full(inc.value) << "\n";
  for (const auto& inc : cfg.sigma_inclusions)
    out << "sigma_inclusion = " << format_full(inc.cx) << " " << format_full(inc.cy) << " "
        << format_full(inc.r) << " " << format_full(inc.value) << "\n";
  out << "\n[sources]\n";
  out << "count = " << cfg.source_count << "\n";
  out << "arc_fraction = " << format_full(cfg.source_arc_fraction) << "\n";
  out << "amplitude = " << format_full(cfg.source_amplitude) << "\n";
  out << "offset_deg = " << format_full(cfg.source_offset_deg) << "\n\n";
  out << "[detectors]\n";
  out << "count = " << cfg.detector_count << "\n";
  out << "arc_fraction = " << format_full(cfg.detector_arc_fraction) << "\n";
  out << "offset_deg = " << format_full(cfg.detector_offset_deg) << "\n\n";
  out << "[regularization]\n";
  out << "mu_prior = " << format_full(cfg.mu_prior) << "\n";
  out << "sigma_prior = " << format_full(cfg.sigma_prior) << "\n";
  out << "mu_max = " << format_full(cfg.mu_max) << "\n";
  out << "sigma_max = " << format_full(cfg.sigma_max) << "\n";
  out << "alpha0 = " << format_full(cfg.alpha0) << "\n";
  out << "alpha_min = " << format_full(cfg.alpha_min) << "\n";
  out << "alpha_pgn = " << format_full(cfg.alpha_pgn) << "\n";
  out << "rate_alphas =";
  for (Scalar a : cfg.rate_alphas) out << " " << format_full(a);
  out << "\n\n[solver]\n";
  out << "rtol = " << format_full(cfg.rtol) << "\n";
  out << "max_iter = " << cfg.max_iter << "\n";
  out << "cg_tol = " << format_full(cfg.cg_tol) << "\n";
  out << "cg_max = " << cfg.cg_max << "\n";
  out << "step_tol = " << format_full(cfg.step_tol) << "\n";
  out << "max_outer = " << cfg.max_outer << "\n";
  out << "seed = " << cfg.seed << "\n";
  out << "out_dir = " << cfg.out_dir << "\n";
  out << "break_adjoint = " << (cfg.break_adjoint ? "true" : "false") << "\n";
  return out.str();
}

void save_config(const std::string& path, const ExperimentConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << serialize_config(cfg);
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace radtomo
