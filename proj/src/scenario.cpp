#include <lamina/scenario.hpp>

#include <json.hpp>

#include <fstream>
#include <set>

namespace lamina {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ScenarioError("scenario: " + where + ": " + what);
}

FourierSeries parse_fourier(const json& j, const std::string& where) {
  FourierSeries s;
  if (j.is_null()) return s;
  if (!j.is_object()) fail(where, "expected an object with a0/terms");
  s.a0 = j.value("a0", 0.0);
  for (const json& t : j.value("terms", json::array())) {
    FourierTerm term;
    term.k = t.value("k", 1);
    term.sin_coef = t.value("sin", 0.0);
    term.cos_coef = t.value("cos", 0.0);
    if (term.k < 1) fail(where, "fourier term needs k >= 1");
    s.terms.push_back(term);
  }
  return s;
}

std::unique_ptr<FoliatedAtlas> parse_atlas(const json& j) {
  if (!j.is_object()) fail("atlas", "missing atlas block");
  std::string model = j.value("model", "");
  int per_axis = j.value("boxes_per_axis", 3);
  double box_len = j.value("box_len", 0.45);
  if (model == "linear_torus") {
    if (!j.contains("n") || !j.contains("leaf_axes"))
      fail("atlas", "linear_torus needs n and leaf_axes");
    std::vector<int> leaf_axes = j.at("leaf_axes").get<std::vector<int>>();
    return std::make_unique<FoliatedAtlas>(
        make_linear_torus_foliation(j.at("n").get<int>(), leaf_axes, per_axis, box_len));
  }
  if (model == "suspension") {
    CircleDiffeo f;
    f.rotation = j.value("rotation", 0.0);
    if (j.contains("fourier"))
      for (const json& t : j.at("fourier")) {
        FourierTerm term;
        term.k = t.value("k", 1);
        term.sin_coef = t.value("sin", 0.0);
        term.cos_coef = t.value("cos", 0.0);
        f.fourier.push_back(term);
      }
    return std::make_unique<FoliatedAtlas>(make_suspension(f, per_axis, box_len));
  }
  fail("atlas", "unknown model '" + model + "'");
}

FoliationMap parse_map(const FoliatedAtlas& atlas, const json& j, const std::string& where) {
  if (!j.is_object()) fail(where, "expected a map block");
  std::string family = j.value("family", "");
  if (family == "identity") return identity_map(atlas);
  if (family == "translation") {
    if (!j.contains("shift")) fail(where, "translation needs shift");
    auto sv = j.at("shift").get<std::vector<double>>();
    if (static_cast<int>(sv.size()) != atlas.n) fail(where, "shift length must equal n");
    Vec s(atlas.n);
    for (int i = 0; i < atlas.n; ++i) s[i] = sv[static_cast<size_t>(i)];
    return translation_map(atlas, s);
  }
  if (family == "leaf_map") {
    Mat A = Mat::Identity(atlas.p, atlas.p);
    if (j.contains("matrix")) {
      auto rows = j.at("matrix").get<std::vector<std::vector<double>>>();
      if (static_cast<int>(rows.size()) != atlas.p) fail(where, "matrix must be p x p");
      for (int i = 0; i < atlas.p; ++i) {
        if (static_cast<int>(rows[static_cast<size_t>(i)].size()) != atlas.p)
          fail(where, "matrix must be p x p");
        for (int k = 0; k < atlas.p; ++k) A(i, k) = rows[static_cast<size_t>(i)][static_cast<size_t>(k)];
      }
    }
    std::vector<FourierSeries> toff;
    if (j.contains("transverse_offset")) {
      for (const json& o : j.at("transverse_offset"))
        toff.push_back(parse_fourier(o, where + ".transverse_offset"));
      while (static_cast<int>(toff.size()) < atlas.p) toff.push_back({});
    }
    FourierSeries lf = parse_fourier(j.value("leaf_fourier", json()), where + ".leaf_fourier");
    try {
      return leaf_map(atlas, A, toff, lf);
    } catch (const std::invalid_argument& e) {
      fail(where, e.what());
    }
  }
  if (family == "composed") {
    if (!j.contains("outer") || !j.contains("inner")) fail(where, "composed needs outer and inner");
    return compose(parse_map(atlas, j.at("outer"), where + ".outer"),
                   parse_map(atlas, j.at("inner"), where + ".inner"));
  }
  if (family == "inverse") {
    if (!j.contains("of")) fail(where, "inverse needs of");
    return inverse_map(parse_map(atlas, j.at("of"), where + ".of"));
  }
  fail(where, "unknown family '" + family + "'");
}

std::unique_ptr<TransverseDensity> parse_measure(const FoliatedAtlas& atlas, const json& j) {
  if (!j.is_object()) fail("measure", "missing measure block");
  std::string family = j.value("family", "");
  if (family == "constant")
    return std::make_unique<TransverseDensity>(constant_density(atlas, j.value("value", 1.0)));
  if (family == "fourier")
    return std::make_unique<TransverseDensity>(
        fourier_density(atlas, parse_fourier(j.value("profile", json()), "measure.profile")));
  fail("measure", "unknown family '" + family + "'");
}

json options_to_json(const Options& o, const std::filesystem::path& out_dir) {
  json j;
  j["tol_plaque"] = o.tol_plaque;
  j["tol_inv"] = o.tol_inv;
  j["tol_zero"] = o.tol_zero;
  j["tol_rank"] = o.tol_rank;
  j["tol_invariance"] = o.tol_invariance;
  j["dedup_radius"] = o.dedup_radius;
  j["trace_step"] = o.trace_step;
  j["grid_per_axis"] = o.grid_per_axis;
  j["seed_factor"] = o.seed_factor;
  j["fd_step"] = o.fd_step;
  j["rng_seed"] = o.rng_seed;
  j["perturb_radius0"] = o.perturb_radius0;
  j["max_attempts"] = o.max_attempts;
  j["compat_samples"] = o.compat_samples;
  j["sp_strict"] = o.sp_strict;
  j["out"] = out_dir.string();
  return j;
}

json certificate_to_json(const PerturbationCertificate& c) {
  json j;
  j["attempts"] = c.attempts;
  j["input_already_transverse"] = c.input_already_transverse;
  j["verified"] = c.verified;
  j["draw_radii"] = c.draw_radii;
  j["draw_norms"] = c.draw_norms;
  j["components"] = c.summary.components;
  j["degenerate_components"] = c.summary.degenerate;
  j["non_simple_points"] = c.summary.non_simple_points;
  j["region_degenerate"] = c.summary.region_degenerate;
  j["sp_contains"] = c.sp_report.contains;
  j["sp_max_c0"] = c.sp_report.max_c0;
  j["sp_max_plaque_dev"] = c.sp_report.max_plaque_dev;
  j["homotopy_track_pass"] = c.homotopy_track.pass;
  j["homotopy_track_violation"] = c.homotopy_track.max_violation;
  if (!c.failure.empty()) j["failure"] = c.failure;
  return j;
}

json report_to_json(const LefschetzReport& rep) {
  json j;
  j["value"] = rep.value;
  j["mode"] = rep.mode;
  j["perturbed"] = rep.perturbed;
  json comps = json::array();
  for (size_t i = 0; i < rep.parts.size(); ++i) {
    const ComponentContribution& p = rep.parts[i];
    json c;
    c["id"] = i;
    c["sign"] = p.sign;
    c["measure"] = p.measure;
    c["contribution"] = p.contribution;
    c["points"] = p.component.line.pts.size();
    c["closed"] = p.component.closed;
    c["degenerate"] = p.component.degenerate_flag;
    c["min_sv_leaf"] = p.component.min_sv_leaf();
    c["min_sv_full"] = p.component.min_sv_full();
    comps.push_back(std::move(c));
  }
  j["components"] = std::move(comps);
  if (rep.certificate) j["certificate"] = certificate_to_json(*rep.certificate);
  j["warnings"] = rep.warnings;
  return j;
}

void write_components_csv(const std::vector<ComponentContribution>& parts, int n,
                          const std::filesystem::path& path) {
  std::ofstream out(path);
  out << "component,index";
  for (int i = 0; i < n; ++i) out << ",x" << i;
  out << ",chart,kind,sv_leaf,sv_full,sign\n";
  out.precision(17);
  for (size_t ci = 0; ci < parts.size(); ++ci) {
    const CoincidenceComponent& comp = parts[ci].component;
    for (size_t k = 0; k < comp.line.pts.size(); ++k) {
      out << ci << ',' << k;
      for (int i = 0; i < n; ++i) out << ',' << comp.line.pts[k].x[i];
      out << ',' << comp.chart_ids[k] << ',' << to_string(comp.cls[k].kind) << ','
          << comp.cls[k].sv_leaf << ',' << comp.cls[k].sv_full << ',' << parts[ci].sign
          << '\n';
    }
  }
}

std::vector<ComponentContribution> bare_components(FindReport&& find) {
  std::vector<ComponentContribution> parts;
  for (auto& comp : find.components) {
    ComponentContribution part;
    part.sign = comp.sign;
    part.component = std::move(comp);
    parts.push_back(std::move(part));
  }
  return parts;
}

}  // namespace

Scenario load_scenario(const std::filesystem::path& file, const CliOverrides& overrides) {
  std::ifstream in(file);
  if (!in) throw ScenarioError("scenario: cannot open " + file.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ScenarioError(std::string("scenario: ") + e.what());
  }

  Scenario sc;
  sc.atlas = parse_atlas(j.value("atlas", json()));

  const json maps = j.value("maps", json::object());
  if (!maps.contains("phi")) fail("maps", "missing phi");
  sc.phi = std::make_unique<FoliationMap>(parse_map(*sc.atlas, maps.at("phi"), "maps.phi"));
  validate_map_continuity(*sc.phi, 128, 0x636f6e74ULL);
  if (maps.contains("psi")) {
    sc.psi = std::make_unique<FoliationMap>(parse_map(*sc.atlas, maps.at("psi"), "maps.psi"));
    validate_map_continuity(*sc.psi, 128, 0x636f6e74ULL);
  }

  if (j.contains("family"))
    for (size_t i = 0; i < j.at("family").size(); ++i) {
      sc.family.push_back(
          parse_map(*sc.atlas, j.at("family")[i], "family[" + std::to_string(i) + "]"));
      validate_map_continuity(sc.family.back(), 128, 0x636f6e74ULL);
    }

  const json run = j.value("run", json::object());
  sc.command = run.value("command", "");
  sc.opts.grid_per_axis = run.value("grid", sc.opts.grid_per_axis);
  sc.opts.trace_step = run.value("step", sc.opts.trace_step);
  sc.opts.rng_seed = run.value("seed", sc.opts.rng_seed);
  sc.opts.tol_rank = run.value("tol_rank", sc.opts.tol_rank);
  sc.opts.tol_invariance = run.value("tol_invariance", sc.opts.tol_invariance);
  sc.opts.max_attempts = run.value("max_attempts", sc.opts.max_attempts);
  sc.opts.perturb_radius0 = run.value("perturb_radius", sc.opts.perturb_radius0);
  sc.opts.sp_strict = run.value("sp_strict", sc.opts.sp_strict);
  sc.out_dir = run.value("out", std::string("out"));

  std::string cmd = sc.command;
  bool needs_measure = cmd != "fix";
  if (j.contains("measure"))
    sc.density = parse_measure(*sc.atlas, j.at("measure"));
  else if (needs_measure && !cmd.empty())
    fail("measure", "missing measure block for '" + cmd + "'");

  if (overrides.seed) sc.opts.rng_seed = *overrides.seed;
  if (overrides.grid) sc.opts.grid_per_axis = *overrides.grid;
  if (overrides.step) sc.opts.trace_step = *overrides.step;
  if (overrides.tol_rank) sc.opts.tol_rank = *overrides.tol_rank;
  if (overrides.max_attempts) sc.opts.max_attempts = *overrides.max_attempts;
  if (overrides.out) sc.out_dir = *overrides.out;

  if (sc.opts.grid_per_axis < 4) fail("run", "grid too coarse");
  if (sc.opts.trace_step <= 0 || sc.opts.trace_step > 0.1) fail("run", "bad trace step");
  return sc;
}

void emit_plot_data(const LefschetzReport& report, int ambient_dim,
                    const std::filesystem::path& csv_path) {
  write_components_csv(report.parts, ambient_dim, csv_path);
}

RunResult run_scenario(const std::filesystem::path& file, const std::string& command,
                       const CliOverrides& overrides) {
  RunResult res;
  json out;
  Scenario sc;
  try {
    sc = load_scenario(file, overrides);
    if (!command.empty()) sc.command = command;
    const std::string& cmd = sc.command;
    if (cmd.empty()) fail("run", "no command given");
    const std::set<std::string> known{"fix", "coin", "lefschetz", "invariance",
                                      "check-measure", "trace-rhs"};
    if (!known.count(cmd)) fail("run", "unknown command '" + cmd + "'");
    if (cmd != "fix" && !sc.density) fail("measure", "missing measure block for '" + cmd + "'");
    if (cmd == "coin" && !sc.psi) fail("maps", "'coin' needs both phi and psi");
    if (cmd == "invariance" && sc.family.empty()) fail("family", "'invariance' needs a family");

    std::filesystem::create_directories(sc.out_dir);
    res.report_path = sc.out_dir / "report.json";
    res.components_csv = sc.out_dir / "components.csv";

    out["command"] = cmd;
    out["scenario"] = file.string();
    out["options"] = options_to_json(sc.opts, sc.out_dir);
    out["outputs"]["components_csv"] = res.components_csv.string();

    std::vector<ComponentContribution> csv_parts;
    int exit_code = 0;

    if (cmd == "fix") {
      FoliationMap id = identity_map(*sc.atlas);
      DefectField defect(id, *sc.phi, sc.opts);
      FindReport find = find_components(defect, sc.opts.grid_per_axis, sc.opts);
      out["region_degenerate"] = find.region_degenerate;
      out["warnings"] = find.warnings;
      json comps = json::array();
      for (size_t i = 0; i < find.components.size(); ++i) {
        const CoincidenceComponent& c = find.components[i];
        json jc;
        jc["id"] = i;
        jc["points"] = c.line.pts.size();
        jc["closed"] = c.closed;
        jc["degenerate"] = c.degenerate_flag;
        jc["sign"] = c.sign;
        jc["min_sv_leaf"] = c.min_sv_leaf();
        jc["min_sv_full"] = c.min_sv_full();
        comps.push_back(std::move(jc));
      }
      out["components"] = std::move(comps);
      csv_parts = bare_components(std::move(find));
    } else if (cmd == "check-measure") {
      InvarianceReport rep = check_holonomy_invariance(*sc.density, 33, sc.opts.tol_inv);
      out["pass"] = rep.pass;
      out["max_violation"] = rep.max_violation;
      out["transitions_checked"] = rep.transitions_checked;
      json worst;
      worst["source"] = rep.worst.source;
      worst["target"] = rep.worst.target;
      worst["violation"] = rep.worst.violation;
      if (rep.worst.t.size() > 0) worst["t"] = rep.worst.t[0];
      out["worst"] = std::move(worst);
      if (!rep.pass) {
        exit_code = 2;
        res.message = "measure not invariant";
      }
    } else if (cmd == "lefschetz" || cmd == "coin") {
      LefschetzReport rep;
      if (cmd == "lefschetz") {
        rep = lambda_lefschetz(*sc.phi, *sc.density, sc.opts);
      } else {
        rep = lambda_coincidence(*sc.phi, *sc.psi, *sc.density, sc.opts);
      }
      out["report"] = report_to_json(rep);
      out["value"] = rep.value;
      emit_plot_data(rep, sc.atlas->n, res.components_csv);
      std::ofstream rf(res.report_path);
      rf << out.dump(2) << '\n';
      res.exit_code = exit_code;
      return res;
    } else if (cmd == "trace-rhs") {
      out["value"] = trace_formula_rhs(*sc.phi, *sc.density, sc.opts);
    } else if (cmd == "invariance") {
      FoliationMap id = identity_map(*sc.atlas);
      const FoliationMap& base_a = sc.psi ? *sc.phi : id;
      const FoliationMap& base_b = sc.psi ? *sc.psi : *sc.phi;
      InvarianceSuiteReport rep =
          verify_homotopy_invariance(base_a, base_b, sc.family, *sc.density, sc.opts);
      out["pass"] = rep.pass;
      out["values"] = rep.values;
      out["spread"] = rep.spread;
      json tracks = json::array();
      for (const TrackReport& t : rep.witnesses) {
        json tj;
        tj["pass"] = t.pass;
        tj["max_violation"] = t.max_violation;
        tracks.push_back(std::move(tj));
      }
      out["witnesses"] = std::move(tracks);
      if (!rep.pass) {
        exit_code = 2;
        res.message = "invariance suite failed";
      }
    }

    write_components_csv(csv_parts, sc.atlas->n, res.components_csv);
    std::ofstream rf(res.report_path);
    rf << out.dump(2) << '\n';
    res.exit_code = exit_code;
    return res;
  } catch (const ScenarioError& e) {
    res.exit_code = 1;
    res.message = e.what();
  } catch (const std::invalid_argument& e) {
    res.exit_code = 1;
    res.message = e.what();
  } catch (const VerificationError& e) {
    res.exit_code = 2;
    res.message = e.what();
  } catch (const NumericalError& e) {
    res.exit_code = 3;
    res.message = e.what();
  } catch (const std::exception& e) {
    res.exit_code = 1;
    res.message = e.what();
  }
  // Failure path: still try to leave a report behind.
  if (!res.report_path.empty()) {
    out["error"] = res.message;
    out["exit_code"] = res.exit_code;
    std::ofstream rf(res.report_path);
    if (rf) rf << out.dump(2) << '\n';
  }
  return res;
}

}  // namespace lamina
