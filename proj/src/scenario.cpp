#include "apv/scenario.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

namespace apv::scenario {

namespace {

using nlohmann::json;

[[noreturn]] void schema_error(const std::string& message) { throw Error(ErrorCode::Schema, message); }

std::string join(const std::string& path, std::string_view key) {
  return path.empty() ? std::string(key) : fmt::format("{}.{}", path, key);
}

// Object reader that records which keys were consumed so leftovers can be
// reported as unknown.
class Node {
 public:
  Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) schema_error(fmt::format("{}: expected an object", path_.empty() ? "<root>" : path_));
  }

  const std::string& path() const { return path_; }
  bool has(const char* key) const { return j_.contains(key); }

  const json& required(const char* key) {
    if (!j_.contains(key)) schema_error(fmt::format("{}: missing required key", join(path_, key)));
    used_.insert(key);
    return j_.at(key);
  }

  const json* optional(const char* key) {
    if (!j_.contains(key)) return nullptr;
    used_.insert(key);
    return &j_.at(key);
  }

  double number(const char* key) { return as_number(required(key), join(path_, key)); }
  double number_or(const char* key, double fallback) {
    const json* v = optional(key);
    return v ? as_number(*v, join(path_, key)) : fallback;
  }
  std::int64_t integer(const char* key) { return as_integer(required(key), join(path_, key)); }
  std::int64_t integer_or(const char* key, std::int64_t fallback) {
    const json* v = optional(key);
    return v ? as_integer(*v, join(path_, key)) : fallback;
  }
  std::uint64_t unsigned_integer(const char* key) {
    const json& v = required(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
      schema_error(fmt::format("{}: expected a non-negative integer", join(path_, key)));
    }
    return v.get<std::uint64_t>();
  }
  Vec3 vec3(const char* key) { return as_vec3(required(key), join(path_, key)); }
  Vec3 vec3_or(const char* key, const Vec3& fallback) {
    const json* v = optional(key);
    return v ? as_vec3(*v, join(path_, key)) : fallback;
  }
  std::string string(const char* key) {
    const json& v = required(key);
    if (!v.is_string()) schema_error(fmt::format("{}: expected a string", join(path_, key)));
    return v.get<std::string>();
  }
  Node object(const char* key) { return Node(required(key), join(path_, key)); }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!used_.count(item.key())) schema_error(fmt::format("{}: unknown key", join(path_, item.key())));
    }
  }

  static double as_number(const json& v, const std::string& where) {
    if (!v.is_number()) schema_error(fmt::format("{}: expected a number", where));
    const double d = v.get<double>();
    if (!std::isfinite(d)) schema_error(fmt::format("{}: must be finite", where));
    return d;
  }
  static std::int64_t as_integer(const json& v, const std::string& where) {
    if (!v.is_number_integer()) schema_error(fmt::format("{}: expected an integer", where));
    return v.get<std::int64_t>();
  }
  static Vec3 as_vec3(const json& v, const std::string& where) {
    if (!v.is_array() || v.size() != 3) schema_error(fmt::format("{}: expected an array of 3 numbers", where));
    return Vec3(as_number(v[0], where + "[0]"), as_number(v[1], where + "[1]"), as_number(v[2], where + "[2]"));
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

template <class F>
auto rethrow_as_schema(const std::string& where, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() != ErrorCode::InvalidArgument) throw;
    schema_error(fmt::format("{}: {}", where, e.what()));
  }
}

geom::StandingWave parse_wave(Node n) {
  const Vec3 direction = n.vec3("direction");
  const double wavelength = n.number("wavelength_nm") * 1e-9;
  const double amplitude = n.number("amplitude_V_per_m");
  const Vec3 pol_re = n.vec3("polarization_real");
  const Vec3 pol_im = n.vec3_or("polarization_imag", Vec3::Zero());
  const double spatial = n.number("spatial_phase_rad");
  const double temporal = n.number("temporal_phase_rad");
  const Vec3 mis = n.vec3_or("misalignment_rad", Vec3::Zero());
  n.finish();
  return rethrow_as_schema(n.path(), [&] {
    CVec3 p;
    for (int i = 0; i < 3; ++i) p(i) = Complex(pol_re(i), pol_im(i));
    return geom::StandingWave::from_wavelength(direction, wavelength, amplitude, geom::Polarization::from_vector(p),
                                               spatial, temporal, geom::EulerAngles{mis.x(), mis.y(), mis.z()});
  });
}

protocol::Distribution parse_distribution(const json& v, const std::string& where) {
  Node n(v, where);
  int kinds = 0;
  protocol::Distribution d;
  if (const json* f = n.optional("fixed")) {
    d = protocol::Distribution::fixed(Node::as_number(*f, join(where, "fixed")));
    ++kinds;
  }
  auto pair = [&](const json& p, const char* key) {
    const std::string w = join(where, key);
    if (!p.is_array() || p.size() != 2) schema_error(fmt::format("{}: expected an array of 2 numbers", w));
    return std::pair{Node::as_number(p[0], w + "[0]"), Node::as_number(p[1], w + "[1]")};
  };
  if (const json* u = n.optional("uniform")) {
    const auto [lo, hi] = pair(*u, "uniform");
    d = protocol::Distribution::uniform(lo, hi);
    ++kinds;
  }
  if (const json* g = n.optional("normal")) {
    const auto [mean, sigma] = pair(*g, "normal");
    d = protocol::Distribution::normal(mean, sigma);
    ++kinds;
  }
  n.finish();
  if (kinds != 1) schema_error(fmt::format("{}: specify exactly one of fixed | uniform | normal", where));
  rethrow_as_schema(where, [&] { d.validate(where); return 0; });
  return d;
}

protocol::SystematicsBudget parse_systematics(Node n) {
  protocol::SystematicsBudget b;
  b.ellipticity = parse_distribution(n.required("ellipticity"), join(n.path(), "ellipticity"));
  const json& mis = n.required("misalignment_rad");
  const std::string mis_path = join(n.path(), "misalignment_rad");
  if (!mis.is_array() || mis.size() != 3) schema_error(fmt::format("{}: expected 3 distributions", mis_path));
  for (std::size_t i = 0; i < 3; ++i) {
    b.misalignment_rad[i] = parse_distribution(mis[i], fmt::format("{}[{}]", mis_path, i));
  }
  b.B_gradient_T_per_m = parse_distribution(n.required("B_gradient_T_per_m"), join(n.path(), "B_gradient_T_per_m"));
  b.stray_common_rad_per_s =
      parse_distribution(n.required("stray_common_rad_per_s"), join(n.path(), "stray_common_rad_per_s"));
  b.stray_gradient_rad_per_s_per_m = parse_distribution(n.required("stray_gradient_rad_per_s_per_m"),
                                                        join(n.path(), "stray_gradient_rad_per_s_per_m"));
  if (const json* v = n.optional("phase_translation_error_rad")) {
    b.phase_translation_error_rad = parse_distribution(*v, join(n.path(), "phase_translation_error_rad"));
  }
  b.coupling_ratio = n.number_or("coupling_ratio", 1e7);
  n.finish();
  rethrow_as_schema(n.path(), [&] { b.validate(); return 0; });
  return b;
}

CampaignSettings parse_campaign(Node n) {
  CampaignSettings c;
  c.wait_s = n.number("wait_s");
  c.shots_per_point = n.unsigned_integer("shots_per_point");
  c.analysis_phase_points = static_cast<int>(n.integer("analysis_phase_points"));
  c.trials = static_cast<int>(n.integer("trials"));
  c.master_seed = n.unsigned_integer("master_seed");
  c.contrast = n.number("contrast");
  c.cycle_time_s = n.number("cycle_time_s");
  c.total_time_s = n.number("total_time_s");
  c.max_fit_failure_fraction = n.number_or("max_fit_failure_fraction", 0.01);
  c.threads = static_cast<int>(n.integer_or("threads", 1));
  if (const json* v = n.optional("noiseless")) {
    if (!v->is_boolean()) schema_error(fmt::format("{}: expected a boolean", join(n.path(), "noiseless")));
    c.noiseless = v->get<bool>();
  }
  n.finish();

  auto check = [&](bool ok, const char* key, const char* what) {
    if (!ok) schema_error(fmt::format("{}: {}", join(n.path(), key), what));
  };
  check(c.wait_s > 0.0, "wait_s", "must be positive");
  check(c.shots_per_point >= 1, "shots_per_point", "must be at least 1");
  check(c.analysis_phase_points >= 3, "analysis_phase_points", "must be at least 3");
  check(c.trials >= 1, "trials", "must be at least 1");
  check(c.contrast > 0.0 && c.contrast <= 1.0, "contrast", "must lie in (0, 1]");
  check(c.cycle_time_s > 0.0, "cycle_time_s", "must be positive");
  check(c.total_time_s > 0.0, "total_time_s", "must be positive");
  check(c.max_fit_failure_fraction >= 0.0 && c.max_fit_failure_fraction <= 1.0, "max_fit_failure_fraction",
        "must lie in [0, 1]");
  check(c.threads >= 1, "threads", "must be at least 1");
  return c;
}

OutputSettings parse_output(Node n) {
  OutputSettings o;
  o.directory = n.string("directory");
  if (const json* f = n.optional("formats")) {
    const std::string where = join(n.path(), "formats");
    if (!f->is_array() || f->empty()) schema_error(fmt::format("{}: expected a non-empty array", where));
    o.csv = o.json = false;
    for (const auto& item : *f) {
      const std::string s = item.is_string() ? item.get<std::string>() : std::string();
      if (s == "csv") {
        o.csv = true;
      } else if (s == "json") {
        o.json = true;
      } else {
        schema_error(fmt::format("{}: formats are \"csv\" or \"json\"", where));
      }
    }
  }
  n.finish();
  return o;
}

}  // namespace

Scenario parse_scenario(const json& document) {
  Scenario s;
  s.document = document;
  Node root(document, "");
  const auto version = root.integer("schema_version");
  if (version != kSchemaVersion) {
    schema_error(fmt::format("schema_version: unsupported version {} (expected {})", version, kSchemaVersion));
  }

  {
    Node f = root.object("fields");
    const auto pnc = parse_wave(f.object("pnc_wave"));
    const auto pc = parse_wave(f.object("pc_wave"));
    const Vec3 axis = f.vec3("quantization_axis");
    const Vec3 b = f.vec3("static_B_T");
    f.finish();
    s.fields = rethrow_as_schema("fields", [&] { return geom::FieldConfiguration::make(pnc, pc, axis, b); });
  }
  {
    Node n = root.object("ions");
    const auto count = n.integer("count");
    if (count < 1 || count > spin::kMaxStateVectorIons) schema_error("ions.count: must be in [1, 24]");
    s.ion_count = static_cast<int>(count);
    if (n.string("placement") != "successive_pc_nodes") {
      schema_error("ions.placement: only \"successive_pc_nodes\" is supported");
    }
    s.ion_origin = n.vec3_or("origin_m", Vec3::Zero());
    s.trap_axis = n.vec3_or("trap_axis", Vec3::UnitX());
    if (!(s.trap_axis.norm() > 0.0)) schema_error("ions.trap_axis: must be nonzero");
    n.finish();
  }
  {
    Node n = root.object("eta");
    if (const json* t = n.optional("target_shift_Hz")) s.eta_target_Hz = Node::as_number(*t, "eta.target_shift_Hz");
    if (const json* e = n.optional("eta_e_a0")) s.eta_e_a0 = Node::as_number(*e, "eta.eta_e_a0");
    s.omega_over_rabi = n.number_or("omega_over_rabi", 1.0);
    n.finish();
    if (s.eta_target_Hz.has_value() == s.eta_e_a0.has_value()) {
      schema_error("eta: specify exactly one of target_shift_Hz | eta_e_a0");
    }
    if (!(s.omega_over_rabi > 0.0)) schema_error("eta.omega_over_rabi: must be positive");
  }
  s.systematics = parse_systematics(root.object("systematics"));
  s.campaign = parse_campaign(root.object("campaign"));
  s.output = parse_output(root.object("output"));
  root.finish();
  return s;
}

Scenario parse_scenario_text(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end(), nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    schema_error(fmt::format("scenario is not valid JSON: {}", e.what()));
  }
  return parse_scenario(doc);
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) schema_error(fmt::format("cannot open scenario file '{}'", path));
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_scenario_text(buffer.str());
}

Scenario with_override(const Scenario& base, std::string_view path, const json& value) {
  if (path.empty()) schema_error("override path is empty");
  json doc = base.document;
  json* node = &doc;
  std::string walked;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = path.find('.', start);
    const std::string_view seg = path.substr(start, dot == std::string_view::npos ? path.size() - start : dot - start);
    if (seg.empty()) schema_error(fmt::format("{}: malformed override path", path));
    walked = join(walked, seg);
    const bool last = dot == std::string_view::npos;
    if (node->is_array()) {
      std::size_t index = 0;
      const auto [ptr, ec] = std::from_chars(seg.data(), seg.data() + seg.size(), index);
      if (ec != std::errc() || ptr != seg.data() + seg.size() || index >= node->size()) {
        schema_error(fmt::format("{}: invalid array index", walked));
      }
      node = &(*node)[index];
    } else if (node->is_object()) {
      if (!last && !node->contains(std::string(seg))) schema_error(fmt::format("{}: unknown key", walked));
      node = &(*node)[std::string(seg)];
    } else {
      schema_error(fmt::format("{}: cannot descend into a scalar", walked));
    }
    if (last) break;
    start = dot + 1;
  }
  *node = value;
  return parse_scenario(doc);
}

json default_document() {
  const auto wave = [](std::array<double, 3> dir, double amp, std::array<double, 3> pol, double spatial,
                       double temporal) {
    return json{{"direction", dir},
                {"wavelength_nm", geom::defaults::kWavelength * 1e9},
                {"amplitude_V_per_m", amp},
                {"polarization_real", pol},
                {"polarization_imag", {0.0, 0.0, 0.0}},
                {"spatial_phase_rad", spatial},
                {"temporal_phase_rad", temporal},
                {"misalignment_rad", {0.0, 0.0, 0.0}}};
  };
  const json percent_angle = {{"normal", {0.0, 1e-2}}};
  return json{
      {"schema_version", kSchemaVersion},
      {"fields",
       {{"pnc_wave", wave({0, 0, 1}, geom::defaults::kPncAmplitude, {1, 0, 0}, 0.0, kPi / 2)},
        {"pc_wave", wave({1, 0, 0}, geom::defaults::kPcAmplitude, {0, 0, 1}, kPi / 2, 0.0)},
        {"quantization_axis", {0.0, 0.0, 1.0}},
        {"static_B_T", {0.0, 0.0, geom::defaults::kStaticBz}}}},
      {"ions", {{"count", 2}, {"placement", "successive_pc_nodes"}, {"origin_m", {0.0, 0.0, 0.0}},
                {"trap_axis", {1.0, 0.0, 0.0}}}},
      {"eta", {{"target_shift_Hz", 0.4}, {"omega_over_rabi", 1.0}}},
      {"systematics",
       {{"ellipticity", {{"uniform", {0.0, 1.0}}}},
        {"misalignment_rad", {percent_angle, percent_angle, percent_angle}},
        {"B_gradient_T_per_m", {{"normal", {0.0, 1e-5}}}},
        {"stray_common_rad_per_s", {{"normal", {0.0, 10.0}}}},
        {"stray_gradient_rad_per_s_per_m", {{"normal", {0.0, 1e5}}}},
        {"phase_translation_error_rad", {{"fixed", 0.0}}},
        {"coupling_ratio", 1e7}}},
      {"campaign",
       {{"wait_s", 1.0},
        {"shots_per_point", 5000},
        {"analysis_phase_points", 32},
        {"trials", 1000},
        {"master_seed", 20240917},
        {"contrast", 1.0},
        {"cycle_time_s", 1.0},
        {"total_time_s", 320000.0},
        {"max_fit_failure_fraction", 0.01},
        {"threads", 1},
        {"noiseless", false}}},
      {"output", {{"directory", "apv_out"}, {"formats", {"csv", "json"}}}}};
}

shifts::EtaModel resolve_eta(const Scenario& s) {
  if (s.eta_e_a0) return shifts::EtaModel::make(*s.eta_e_a0, s.omega_over_rabi);
  const auto sites = ion_sites(s);
  return shifts::calibrate_eta(s.fields, sites.front().position, kTwoPi * *s.eta_target_Hz, s.omega_over_rabi);
}

std::vector<geom::IonSite> ion_sites(const Scenario& s) {
  return geom::place_ions_on_nodes(s.fields.pc_wave, s.ion_count, s.ion_origin, s.trap_axis);
}

protocol::CampaignConfig campaign_config(const Scenario& s, const shifts::EtaModel& eta) {
  protocol::CampaignConfig c;
  c.n_ions = s.ion_count;
  c.fields = s.fields;
  c.eta = eta;
  c.ion_origin = s.ion_origin;
  c.trap_axis = s.trap_axis;
  c.wait_s = s.campaign.wait_s;
  c.shots_per_point = s.campaign.shots_per_point;
  c.analysis_phases = protocol::uniform_phase_grid(s.campaign.analysis_phase_points);
  c.trials = s.campaign.trials;
  c.master_seed = s.campaign.master_seed;
  c.contrast = s.campaign.contrast;
  c.cycle_time_s = s.campaign.cycle_time_s;
  c.total_time_s = s.campaign.total_time_s;
  c.max_fit_failure_fraction = s.campaign.max_fit_failure_fraction;
  c.threads = s.campaign.threads;
  return c;
}

}  // namespace apv::scenario
