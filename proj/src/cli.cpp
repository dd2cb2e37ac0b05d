// Copyright eddytv contributors.
// SPDX-License-Identifier: Apache-2.0

#include "eddytv/cli.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <set>
#include <sstream>
#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <json.hpp>

#ifndef EDDYTV_VERSION
#define EDDYTV_VERSION "unknown"
#endif

namespace eddytv
{

using json = nlohmann::ordered_json;

namespace
{

// Walks one JSON object, remembering which keys were consumed so that leftovers can be
// reported as unknown.
class ObjectReader
{
public:
  ObjectReader(const json &j, std::string path) : j_(j), path_(std::move(path))
  {
    if (!j_.is_object())
    {
      throw ConfigError(fmt::format("{}: expected an object", Name()));
    }
  }

  bool Has(const char *key) const { return j_.contains(key); }

  void Real(const char *key, double &out) { Scalar(key, out, "a number", &json::is_number); }
  void Bool(const char *key, bool &out) { Scalar(key, out, "a boolean", &json::is_boolean); }
  void String(const char *key, std::string &out)
  {
    Scalar(key, out, "a string", &json::is_string);
  }
  void Int(const char *key, int &out)
  {
    Scalar(key, out, "an integer", &json::is_number_integer);
  }
  void UInt64(const char *key, std::uint64_t &out)
  {
    Scalar(key, out, "a non-negative integer", &json::is_number_unsigned);
  }
  void Path(const char *key, std::filesystem::path &out)
  {
    std::string s;
    if (Has(key))
    {
      String(key, s);
      out = s;
    }
  }
  void Interval2(const char *key, Interval &out)
  {
    if (!Has(key))
    {
      return;
    }
    const json &v = Take(key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    {
      throw ConfigError(fmt::format("{}: expected [lo, hi]", Key(key)));
    }
    out = {v[0].get<double>(), v[1].get<double>()};
  }
  const json &Take(const char *key)
  {
    used_.insert(key);
    return j_.at(key);
  }
  std::string Key(const std::string &key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string Name() const { return path_.empty() ? "config" : path_; }

  void Finish() const
  {
    for (const auto &item : j_.items())
    {
      if (!used_.count(item.key()))
      {
        throw ConfigError(fmt::format("unknown key '{}'", Key(item.key())));
      }
    }
  }

private:
  const json &j_;
  std::string path_;
  std::set<std::string> used_;

  template <typename T>
  void Scalar(const char *key, T &out, const char *what, bool (json::*check)() const noexcept)
  {
    if (!Has(key))
    {
      return;
    }
    const json &v = Take(key);
    if (!(v.*check)())
    {
      throw ConfigError(fmt::format("{}: expected {}", Key(key), what));
    }
    out = v.get<T>();
  }
};

Box ParseBox(const json &v, const std::string &key)
{
  auto bad = [&]() { return ConfigError(fmt::format("{}: expected [[x0,x1],[y0,y1],[z0,z1]]", key)); };
  if (!v.is_array() || v.size() != 3)
  {
    throw bad();
  }
  std::array<Interval, 3> iv;
  for (int k = 0; k < 3; k++)
  {
    if (!v[k].is_array() || v[k].size() != 2 || !v[k][0].is_number() || !v[k][1].is_number())
    {
      throw bad();
    }
    const double a = v[k][0].get<double>(), b = v[k][1].get<double>();
    iv[k] = {std::min(a, b), std::max(a, b)};
  }
  return Box{iv[0], iv[1], iv[2]};
}

Vec3 ParseVec3(const json &v, const std::string &key)
{
  if (!v.is_array() || v.size() != 3 || !v[0].is_number() || !v[1].is_number() ||
      !v[2].is_number())
  {
    throw ConfigError(fmt::format("{}: expected [x, y, z]", key));
  }
  return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
}

void ParseDomain(ObjectReader r, DomainSpec &d)
{
  r.Interval2("x_range", d.x_range);
  r.Interval2("y_range", d.y_range);
  r.Interval2("z_range", d.z_range);
  r.Real("z_interface", d.z_interface);
  if (r.Has("cells_per_axis"))
  {
    const json &v = r.Take("cells_per_axis");
    if (!v.is_array() || v.size() != 3 || !v[0].is_number_integer() ||
        !v[1].is_number_integer() || !v[2].is_number_integer())
    {
      throw ConfigError(fmt::format("{}: expected three integers", r.Key("cells_per_axis")));
    }
    d.cells_per_axis = {v[0].get<int>(), v[1].get<int>(), v[2].get<int>()};
  }
  r.Int("refine_levels", d.refine_levels);
  r.Finish();
}

void ParsePhysics(ObjectReader r, PhysicalParams &p)
{
  r.Real("omega", p.omega);
  r.Real("mu", p.mu);
  r.Real("epsilon", p.epsilon);
  r.Real("sigma0", p.sigma0);
  r.Real("positivity_floor", p.positivity_floor);
  r.Finish();
  for (const auto &[name, v] : {std::pair{"omega", p.omega}, {"mu", p.mu}, {"epsilon", p.epsilon}})
  {
    if (!(v > 0.0))
    {
      throw ConfigError(fmt::format("{}: must be positive", r.Key(name)));
    }
  }
}

void ParseSource(ObjectReader r, SourceSpec &s)
{
  if (r.Has("direction"))
  {
    s.direction = ParseVec3(r.Take("direction"), r.Key("direction"));
    if (!(s.direction.norm() > 0.0))
    {
      throw ConfigError(fmt::format("{}: must be non-zero", r.Key("direction")));
    }
    s.direction.normalize();
  }
  r.Real("strength", s.strength);
  if (r.Has("positions"))
  {
    const json &v = r.Take("positions");
    if (!v.is_array())
    {
      throw ConfigError(fmt::format("{}: expected a list of points", r.Key("positions")));
    }
    s.positions.clear();
    for (std::size_t i = 0; i < v.size(); i++)
    {
      s.positions.push_back(ParseVec3(v[i], fmt::format("{}[{}]", r.Key("positions"), i)));
    }
  }
  r.Finish();
}

void ParseInclusions(const json &v, const std::string &key, std::vector<Inclusion> &out)
{
  if (!v.is_array())
  {
    throw ConfigError(fmt::format("{}: expected a list", key));
  }
  out.clear();
  for (std::size_t i = 0; i < v.size(); i++)
  {
    ObjectReader r(v[i], fmt::format("{}[{}]", key, i));
    Inclusion inc;
    if (!r.Has("box"))
    {
      throw ConfigError(fmt::format("{}: missing", r.Key("box")));
    }
    inc.box = ParseBox(r.Take("box"), r.Key("box"));
    r.Real("value", inc.value);
    inc.label = static_cast<int>(i) + 1;
    r.Int("label", inc.label);
    r.Finish();
    out.push_back(inc);
  }
}

void ParseOuter(ObjectReader r, OuterConfig &o)
{
  r.Real("alpha", o.alpha);
  r.Real("beta", o.beta);
  r.Int("outer_iterations", o.outer_iterations);
  r.Int("nlcg_iterations", o.nlcg_iterations);
  r.Real("early_stop_tol", o.early_stop_tol);
  if (r.Has("multiplier_mode"))
  {
    std::string mode;
    r.String("multiplier_mode", mode);
    try
    {
      o.multiplier_mode = ParseMultiplierMode(mode);
    }
    catch (const ConfigError &e)
    {
      throw ConfigError(fmt::format("{}: {}", r.Key("multiplier_mode"), e.what()));
    }
  }
  if (r.Has("line_search"))
  {
    ObjectReader ls(r.Take("line_search"), r.Key("line_search"));
    ls.Real("c1", o.line_search.c1);
    ls.Real("backtrack", o.line_search.backtrack);
    ls.Int("max_backtracks", o.line_search.max_backtracks);
    ls.Real("initial_step", o.line_search.initial_step);
    ls.Finish();
  }
  if (r.Has("truncation"))
  {
    ObjectReader tr(r.Take("truncation"), r.Key("truncation"));
    tr.Real("m_slope", o.truncation.m_slope);
    if (tr.Has("m_cap"))
    {
      const json &v = tr.Take("m_cap");
      if (v.is_string() && v.get<std::string>() == "inf")
      {
        o.truncation.m_cap = std::numeric_limits<double>::infinity();
      }
      else if (v.is_number())
      {
        o.truncation.m_cap = v.get<double>();
      }
      else
      {
        throw ConfigError(fmt::format("{}: expected a number or \"inf\"", tr.Key("m_cap")));
      }
    }
    tr.Real("upper", o.truncation.upper);
    tr.Finish();
  }
  if (r.Has("inner"))
  {
    ObjectReader in(r.Take("inner"), r.Key("inner"));
    in.Real("rho", o.inner.rho);
    in.Int("iterations", o.inner.iterations);
    in.Real("cg_tol", o.inner.cg_tol);
    in.Int("cg_max_iter", o.inner.cg_max_iter);
    in.Bool("anisotropic", o.inner.anisotropic);
    in.Finish();
  }
  r.Finish();
  o.Validate();
}

json IntervalJson(const Interval &i) { return json::array({i.lo, i.hi}); }

json Vec3Json(const Vec3 &v) { return json::array({v.x(), v.y(), v.z()}); }

}  // namespace

std::filesystem::path RunConfig::MeshPath() const
{
  return mesh_path.empty() ? output_dir / "mesh.txt" : mesh_path;
}

std::filesystem::path RunConfig::TracePath() const
{
  return trace_path.empty() ? output_dir / "trace.txt" : trace_path;
}

std::string RunConfig::Echo() const
{
  const auto &p = preset;
  json j;
  j["version"] = kConfigVersion;
  j["preset"] = preset_number;
  j["name"] = p.name;
  j["domain"] = {{"x_range", IntervalJson(p.domain.x_range)},
                 {"y_range", IntervalJson(p.domain.y_range)},
                 {"z_range", IntervalJson(p.domain.z_range)},
                 {"z_interface", p.domain.z_interface},
                 {"cells_per_axis", p.domain.cells_per_axis},
                 {"refine_levels", p.domain.refine_levels}};
  j["physics"] = {{"omega", p.physics.omega},
                  {"mu", p.physics.mu},
                  {"epsilon", p.physics.epsilon},
                  {"sigma0", p.physics.sigma0},
                  {"positivity_floor", p.physics.positivity_floor}};
  json positions = json::array();
  for (const auto &x : p.source.positions)
  {
    positions.push_back(Vec3Json(x));
  }
  j["source"] = {{"direction", Vec3Json(p.source.direction)},
                 {"strength", p.source.strength},
                 {"positions", positions}};
  json inc = json::array();
  for (const auto &i : p.inclusions)
  {
    inc.push_back({{"box", json::array({IntervalJson(i.box.x), IntervalJson(i.box.y),
                                        IntervalJson(i.box.z)})},
                   {"value", i.value},
                   {"label", i.label}});
  }
  j["inclusions"] = inc;
  const auto &o = p.outer;
  json m_cap = std::isinf(o.truncation.m_cap) ? json("inf") : json(o.truncation.m_cap);
  j["outer"] = {{"alpha", o.alpha},
                {"beta", o.beta},
                {"outer_iterations", o.outer_iterations},
                {"nlcg_iterations", o.nlcg_iterations},
                {"early_stop_tol", o.early_stop_tol},
                {"multiplier_mode", ToString(o.multiplier_mode)},
                {"line_search",
                 {{"c1", o.line_search.c1},
                  {"backtrack", o.line_search.backtrack},
                  {"max_backtracks", o.line_search.max_backtracks},
                  {"initial_step", o.line_search.initial_step}}},
                {"truncation",
                 {{"m_slope", o.truncation.m_slope},
                  {"m_cap", m_cap},
                  {"upper", o.truncation.upper}}},
                {"inner",
                 {{"rho", o.inner.rho},
                  {"iterations", o.inner.iterations},
                  {"cg_tol", o.inner.cg_tol},
                  {"cg_max_iter", o.inner.cg_max_iter},
                  {"anisotropic", o.inner.anisotropic}}}};
  j["data"] = {{"refine_extra", p.refine_extra}, {"noise", p.noise}, {"seed", p.seed}};
  j["paths"] = {{"output_dir", output_dir.string()},
                {"mesh", MeshPath().string()},
                {"trace", TracePath().string()}};
  j["log"] = {{"wall_time", log_wall_time}, {"checkpoint_every", checkpoint_every}};
  j["threads"] = threads;
  return j.dump(2);
}

RunConfig parse_run_config(const std::string &json_text, const CliOverrides &overrides)
{
  json root;
  try
  {
    root = json::parse(json_text);
  }
  catch (const json::parse_error &e)
  {
    throw ConfigError(fmt::format("config is not valid JSON: {}", e.what()));
  }
  ObjectReader r(root, "");
  int version = kConfigVersion;
  r.Int("version", version);
  if (version != kConfigVersion)
  {
    throw ConfigError(fmt::format("version: unsupported config version {}", version));
  }

  RunConfig cfg;
  r.Int("preset", cfg.preset_number);
  if (overrides.preset)
  {
    cfg.preset_number = *overrides.preset;
  }
  try
  {
    cfg.preset = preset_example(cfg.preset_number);
  }
  catch (const ConfigError &e)
  {
    throw ConfigError(fmt::format("preset: {}", e.what()));
  }
  ExperimentPreset &p = cfg.preset;
  r.String("name", p.name);
  if (r.Has("domain"))
  {
    ParseDomain(ObjectReader(r.Take("domain"), "domain"), p.domain);
  }
  if (r.Has("physics"))
  {
    ParsePhysics(ObjectReader(r.Take("physics"), "physics"), p.physics);
  }
  if (r.Has("source"))
  {
    ParseSource(ObjectReader(r.Take("source"), "source"), p.source);
  }
  if (r.Has("inclusions"))
  {
    ParseInclusions(r.Take("inclusions"), "inclusions", p.inclusions);
  }
  if (r.Has("outer"))
  {
    ParseOuter(ObjectReader(r.Take("outer"), "outer"), p.outer);
  }
  if (r.Has("data"))
  {
    ObjectReader d(r.Take("data"), "data");
    d.Int("refine_extra", p.refine_extra);
    d.Real("noise", p.noise);
    d.UInt64("seed", p.seed);
    d.Finish();
    if (p.refine_extra < 1)
    {
      throw ConfigError("data.refine_extra: must be at least 1");
    }
  }
  if (r.Has("paths"))
  {
    ObjectReader d(r.Take("paths"), "paths");
    d.Path("output_dir", cfg.output_dir);
    d.Path("mesh", cfg.mesh_path);
    d.Path("trace", cfg.trace_path);
    d.Finish();
  }
  if (r.Has("log"))
  {
    ObjectReader d(r.Take("log"), "log");
    d.Bool("wall_time", cfg.log_wall_time);
    d.Int("checkpoint_every", cfg.checkpoint_every);
    d.Finish();
  }
  r.Int("threads", cfg.threads);
  r.Finish();

  if (overrides.refine)
  {
    p.domain.refine_levels = *overrides.refine;
  }
  if (overrides.noise)
  {
    p.noise = *overrides.noise;
  }
  if (overrides.seed)
  {
    p.seed = *overrides.seed;
  }
  if (overrides.threads)
  {
    cfg.threads = *overrides.threads;
  }
  if (cfg.threads < 1)
  {
    throw ConfigError("threads: must be at least 1");
  }
  if (cfg.checkpoint_every < 0)
  {
    throw ConfigError("log.checkpoint_every: must be non-negative");
  }
  if (p.noise < 0.0)
  {
    throw ConfigError("data.noise: must be non-negative");
  }
  try
  {
    p.domain.Validate();
  }
  catch (const ConfigError &e)
  {
    throw ConfigError(fmt::format("domain.{}", e.what()));
  }
  p.Validate();
  if (!(p.physics.sigma0 > p.physics.positivity_floor))
  {
    throw ConfigError("physics.sigma0: must exceed physics.positivity_floor");
  }
  try
  {
    p.outer.truncation.At(1).Validate(p.physics.sigma0);
  }
  catch (const ConfigError &e)
  {
    throw ConfigError(fmt::format("outer.truncation: {}", e.what()));
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path &path, const CliOverrides &overrides)
{
  std::ifstream in(path);
  if (!in)
  {
    throw ConfigError("cannot read config file " + path.string());
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), overrides);
}

std::shared_ptr<const Mesh> load_or_build_mesh(const RunConfig &cfg)
{
  if (!cfg.mesh_path.empty() && std::filesystem::exists(cfg.mesh_path))
  {
    return std::make_shared<const Mesh>(read_mesh(cfg.mesh_path));
  }
  Mesh m = build_box_mesh(cfg.preset.domain);
  tag_inclusions(m, cfg.preset);
  return std::make_shared<const Mesh>(std::move(m));
}

namespace
{

void EnsureDir(const std::filesystem::path &file)
{
  if (file.has_parent_path())
  {
    std::filesystem::create_directories(file.parent_path());
  }
}

void WriteManifest(const RunConfig &cfg, const std::string &command, const json &extra)
{
  json j;
  j["command"] = command;
  j["version"] = EDDYTV_VERSION;
  j["config"] = json::parse(cfg.Echo());
  for (const auto &item : extra.items())
  {
    j[item.key()] = item.value();
  }
  const auto path = cfg.output_dir / (command + ".manifest.json");
  EnsureDir(path);
  std::ofstream out(path);
  out << j.dump(2) << "\n";
}

}  // namespace

void cmd_mesh(const RunConfig &cfg, std::ostream &out)
{
  Mesh m = build_box_mesh(cfg.preset.domain);
  tag_inclusions(m, cfg.preset);
  const auto path = cfg.MeshPath();
  EnsureDir(path);
  write_mesh(m, path);
  const std::string hash = mesh_hash(m);
  fmt::print(out, "mesh: {} vertices, {} edges, {} faces, {} tets, h = {}\n",
             m.NumVertices(), m.NumEdges(), m.NumFaces(), m.NumTets(), m.h);
  fmt::print(out, "wrote {} (hash {})\n", path.string(), hash);
  WriteManifest(cfg, "mesh",
                {{"mesh_hash", hash},
                 {"mesh_file", path.string()},
                 {"vertices", m.NumVertices()},
                 {"edges", m.NumEdges()},
                 {"tets", m.NumTets()},
                 {"h", m.h}});
}

void cmd_synth(const RunConfig &cfg, std::ostream &out)
{
  const auto mesh = load_or_build_mesh(cfg);
  const FeSpace space(mesh);
  const auto &p = cfg.preset;
  fmt::print(out, "synth: {} on {} edges, data mesh refined {} time(s)\n", p.name,
             mesh->NumEdges(), p.refine_extra);
  const BoundaryTrace clean = generate_synthetic_data(p, space, p.refine_extra);
  TraceFile file;
  file.trace = add_noise(clean, p.noise, p.seed);
  file.mesh_hash = mesh_hash(*mesh);
  file.noise = p.noise;
  file.seed = p.seed;
  const auto path = cfg.TracePath();
  EnsureDir(path);
  write_trace(file, path);
  fmt::print(out, "wrote {} ({} Gamma faces, noise {}, seed {})\n", path.string(),
             file.trace.NumFaces(), p.noise, p.seed);
  WriteManifest(cfg, "synth",
                {{"preset", p.name},
                 {"seed", p.seed},
                 {"noise", p.noise},
                 {"mesh_hash", file.mesh_hash},
                 {"trace_file", path.string()}});
}

void cmd_invert(const RunConfig &cfg, std::ostream &out, const std::filesystem::path &resume_from)
{
  const auto mesh = load_or_build_mesh(cfg);
  auto space = std::make_shared<const FeSpace>(mesh);
  const auto &p = cfg.preset;
  TraceFile data = read_trace(cfg.TracePath());
  const std::string hash = mesh_hash(*mesh);
  if (data.mesh_hash != hash)
  {
    throw DataError(fmt::format("trace {} was generated for mesh {}, not {}",
                                cfg.TracePath().string(), data.mesh_hash, hash));
  }
  const EddyProblem problem(space, p.physics, p.source, data.trace);
  const InversionContext ctx(problem);

  AdmmState state = AdmmState::Initial(*space);
  if (!resume_from.empty())
  {
    state = read_checkpoint(resume_from);
    if (state.sigma.size() != space->NumConductorDofs())
    {
      throw DataError("checkpoint does not match the mesh");
    }
    fmt::print(out, "resuming from {} at outer iteration {}\n", resume_from.string(), state.k);
  }

  std::filesystem::create_directories(cfg.output_dir);
  const auto log_path = cfg.output_dir / "log.csv";
  const auto checkpoint_path = cfg.output_dir / "checkpoint.txt";
  std::ofstream log(log_path);
  write_log_header(log);
  for (const auto &rec : state.history)
  {
    write_log_row(log, rec);
  }
  log.flush();

  RunOptions opts;
  opts.record_wall_time = cfg.log_wall_time;
  opts.snapshot_path = cfg.output_dir / "snapshot.txt";
  if (!p.inclusions.empty())
  {
    opts.error = [&](const NodalField &s) { return sigma_l2_error(*space, s, p); };
  }
  opts.on_iteration = [&](const AdmmState &st)
  {
    const IterationRecord &r = st.history.back();
    write_log_row(log, r);
    log.flush();
    fmt::print(out, "k {:3d}  L {:.6e}  G {:.6e}  TV {:.4e}  |s-sigma| {:.3e}  err {:.4e}\n", r.k,
               r.L, r.G, r.TV, r.s_sigma_l2, r.sigma_error);
    if (cfg.checkpoint_every > 0 && r.k > 0 && r.k % cfg.checkpoint_every == 0)
    {
      write_checkpoint(st, checkpoint_path);
    }
  };
  const AdmmState final_state = run_modified_admm(ctx, p.outer, std::move(state), opts);
  write_checkpoint(final_state, cfg.output_dir / "final_state.txt");
  export_vtk(*space, {final_state.sigma, final_state.s, final_state.y},
             cfg.output_dir / "result.vtk");

  json extra = {{"preset", p.name},
                {"mesh_hash", hash},
                {"trace_file", cfg.TracePath().string()},
                {"trace_noise", data.noise},
                {"trace_seed", data.seed},
                {"outer_iterations_run", final_state.k},
                {"factorizations", problem.FactorizationCount()}};
  if (!final_state.history.empty())
  {
    const auto &last = final_state.history.back();
    extra["final"] = {{"L", last.L}, {"G", last.G}, {"sigma_error", last.sigma_error}};
  }
  WriteManifest(cfg, "invert", extra);
  fmt::print(out, "wrote {}, {}\n", log_path.string(), (cfg.output_dir / "result.vtk").string());
}

void cmd_report(const RunConfig &cfg, std::ostream &out)
{
  const auto log_path = cfg.output_dir / "log.csv";
  std::ifstream in(log_path);
  if (!in)
  {
    throw DataError("cannot read " + log_path.string() + "; run `invert` first");
  }
  std::string line;
  std::getline(in, line);
  std::vector<std::array<double, 8>> rows;
  while (std::getline(in, line))
  {
    std::array<double, 8> row{};
    std::stringstream ss(line);
    std::string cell;
    for (double &v : row)
    {
      if (!std::getline(ss, cell, ','))
      {
        throw DataError("malformed row in " + log_path.string());
      }
      v = std::strtod(cell.c_str(), nullptr);
    }
    rows.push_back(row);
  }
  if (rows.empty())
  {
    throw DataError(log_path.string() + " has no iterations");
  }
  int increases = 0;
  for (std::size_t i = 1; i < rows.size(); i++)
  {
    increases += rows[i][1] > rows[i - 1][1] ? 1 : 0;
  }
  const auto &first = rows.front();
  const auto &last = rows.back();
  fmt::print(out, "iterations: {}\n", static_cast<int>(last[0]));
  fmt::print(out, "L: {:.6e} -> {:.6e} ({} increases)\n", first[1], last[1], increases);
  fmt::print(out, "G: {:.6e} -> {:.6e}\n", first[2], last[2]);
  fmt::print(out, "||s - sigma||: {:.4e} -> {:.4e}\n", rows.size() > 1 ? rows[1][4] : first[4],
             last[4]);
  fmt::print(out, "sigma error: {:.6e} -> {:.6e}\n", first[6], last[6]);

  const auto mesh = load_or_build_mesh(cfg);
  const FeSpace space(mesh);
  const auto truth_path = cfg.output_dir / "truth.vtk";
  export_vtk(space, {interpolate_truth(space, cfg.preset), {}, {}}, truth_path);
  fmt::print(out, "wrote {}\n", truth_path.string());
}

void export_vtk(const FeSpace &space, const VtkFields &fields, const std::filesystem::path &path)
{
  const Mesh &m = space.GetMesh();
  std::ostringstream os;
  os << "# vtk DataFile Version 3.0\neddytv\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  os << fmt::format("POINTS {} double\n", m.NumVertices());
  for (const auto &v : m.vertices)
  {
    os << fmt::format("{} {} {}\n", v.x(), v.y(), v.z());
  }
  os << fmt::format("CELLS {} {}\n", m.NumTets(), 5 * m.NumTets());
  for (const auto &t : m.tets)
  {
    os << fmt::format("4 {} {} {} {}\n", t[0], t[1], t[2], t[3]);
  }
  os << fmt::format("CELL_TYPES {}\n", m.NumTets());
  for (int t = 0; t < m.NumTets(); t++)
  {
    os << "10\n";
  }

  auto expand = [&](const NodalField &v)
  {
    Eigen::VectorXd full = Eigen::VectorXd::Zero(m.NumVertices());
    for (int i = 0; i < v.size(); i++)
    {
      full[space.ConductorVertices()[i]] = v[i];
    }
    return full;
  };
  os << fmt::format("POINT_DATA {}\n", m.NumVertices());
  for (const auto &[name, field] :
       {std::pair<const char *, const NodalField *>{"sigma", &fields.sigma},
        {"s", &fields.s},
        {"y", &fields.y}})
  {
    if (field->size() == 0)
    {
      continue;
    }
    if (field->size() != space.NumConductorDofs())
    {
      throw DimensionError(fmt::format("VTK field {} has the wrong size", name));
    }
    os << fmt::format("SCALARS {} double 1\nLOOKUP_TABLE default\n", name);
    const Eigen::VectorXd full = expand(*field);
    for (int i = 0; i < full.size(); i++)
    {
      os << fmt::format("{}\n", full[i]);
    }
  }

  os << fmt::format("CELL_DATA {}\n", m.NumTets());
  if (fields.sigma.size() > 0)
  {
    Eigen::VectorXd grad_norm = Eigen::VectorXd::Zero(m.NumTets());
    const CellGradient G = cell_gradient_operator(space);
    const CellVectorField g = G.Apply(fields.sigma);
    for (int c = 0; c < G.NumCells(); c++)
    {
      grad_norm[space.ConductorTets()[c]] = g.row(c).norm();
    }
    os << "SCALARS grad_sigma_norm double 1\nLOOKUP_TABLE default\n";
    for (int t = 0; t < m.NumTets(); t++)
    {
      os << fmt::format("{}\n", grad_norm[t]);
    }
  }
  os << "SCALARS subregion int 1\nLOOKUP_TABLE default\n";
  for (int t = 0; t < m.NumTets(); t++)
  {
    os << m.subregion_tags[t] << "\n";
  }

  EnsureDir(path);
  std::ofstream out(path);
  if (!out)
  {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << os.str();
}

int run_cli(int argc, char **argv)
{
  CLI::App app{"Eddy-current conductivity reconstruction with TV regularization"};
  app.require_subcommand(1);
  std::string config_path;
  CliOverrides ov;
  std::filesystem::path resume;

  auto add_common = [&](CLI::App *sub)
  {
    sub->add_option("-c,--config", config_path, "JSON run configuration");
    sub->add_option("--preset", ov.preset, "experiment preset (1, 2 or 3)");
    sub->add_option("--refine", ov.refine, "uniform refinements of the inversion mesh");
    sub->add_option("--noise", ov.noise, "multiplicative noise level nu");
    sub->add_option("--seed", ov.seed, "noise seed");
    sub->add_option("--threads", ov.threads, "worker threads");
  };
  CLI::App *mesh = app.add_subcommand("mesh", "build and write the inversion mesh");
  CLI::App *synth = app.add_subcommand("synth", "generate a synthetic boundary trace");
  CLI::App *invert = app.add_subcommand("invert", "run the modified ADMM inversion");
  CLI::App *report = app.add_subcommand("report", "summarize a run and export the truth");
  for (auto *sub : {mesh, synth, invert, report})
  {
    add_common(sub);
  }
  invert->add_option("--resume", resume, "checkpoint to continue from");

  try
  {
    app.parse(argc, argv);
  }
  catch (const CLI::ParseError &e)
  {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try
  {
    const RunConfig cfg =
        config_path.empty() ? parse_run_config("{}", ov) : load_run_config(config_path, ov);
    if (mesh->parsed())
    {
      cmd_mesh(cfg, std::cout);
    }
    else if (synth->parsed())
    {
      cmd_synth(cfg, std::cout);
    }
    else if (invert->parsed())
    {
      cmd_invert(cfg, std::cout, resume);
    }
    else
    {
      cmd_report(cfg, std::cout);
    }
  }
  catch (const ConfigError &e)
  {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  catch (const MeshParseError &e)
  {
    std::cerr << "mesh error: " << e.what() << "\n";
    return 2;
  }
  catch (const DataError &e)
  {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  }
  catch (const SingularMatrixError &e)
  {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  }
  catch (const std::domain_error &e)
  {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  }
  catch (const std::exception &e)
  {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace eddytv
