#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>

#include "fabtip/app.hpp"
#include "fabtip/config.hpp"
#include "fabtip/errors.hpp"
#include "fabtip/service.hpp"

namespace fs = std::filesystem;
using namespace fabtip;

namespace {

void print(const nlohmann::json& j) { std::cout << j.dump(2) << std::endl; }

void apply_preset(BenchSetup& bench, const std::string& preset) {
  if (preset == "bench")
    bench.dynamics = DynamicsParams::bench_calibrated();
  else if (preset != "default" && !preset.empty())
    throw ValidationError("unknown preset '" + preset + "' (expected default or bench)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Four-chamber pneumatic fingertip haptics: simulation, characterization and study tools"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  app.add_option("--config", config_path, "JSON system config")->check(CLI::ExistingFile);

  std::optional<fs::path> out;
  bool force = false;
  auto add_out = [&](CLI::App* cmd) {
    cmd->add_option("--out", out, "output directory (default $HAPTICS_OUT)");
    cmd->add_flag("--force", force, "overwrite existing outputs");
  };

  // sim run
  auto* sim = app.add_subcommand("sim", "closed-loop rendering pipeline")->require_subcommand(1);
  auto* sim_run = sim->add_subcommand("run", "render a trajectory against a scene");
  app::SimRunOptions sim_opts;
  std::string mode = "contact";
  std::uint64_t seed = 0;
  sim_run->add_option("--scene", sim_opts.scene, "scene JSON")->required();
  sim_run->add_option("--trajectory", sim_opts.trajectory, "hand trajectory CSV")->required();
  sim_run->add_option("--mode", mode, "contact | sliding | vibro")->required();
  sim_run->add_option("--seed", seed, "sensor noise seed")->required();
  add_out(sim_run);

  // characterize
  auto* ch = app.add_subcommand("characterize", "actuator characterization")->require_subcommand(1);
  std::optional<fs::path> import;
  std::string preset = "default";
  SweepPlan plan;
  DurabilityPlan dplan;
  auto* sweep = ch->add_subcommand("sweep", "frequency sweep and -3 dB bandwidth");
  sweep->add_option("--fmin", plan.fmin);
  sweep->add_option("--fmax", plan.fmax);
  sweep->add_option("--points", plan.points);
  sweep->add_option("--cycles", plan.cycles);
  auto* step = ch->add_subcommand("step", "step response rise and fall times");
  auto* dur = ch->add_subcommand("durability", "cyclic loading drift");
  dur->add_option("--cycles", dplan.cycles);
  dur->add_option("--period", dplan.period, "cycle period in s");
  for (auto* cmd : {sweep, step, dur}) {
    cmd->add_option("--import", import, "analyze a lab CSV instead of the emulator");
    cmd->add_option("--preset", preset, "dynamics preset: default | bench");
    add_out(cmd);
  }

  // study
  auto* study = app.add_subcommand("study", "psychophysics sessions")->require_subcommand(1);
  auto* srun = study->add_subcommand("run", "run one identification task");
  std::string task = "patterns", responder = "observer", participant = "observer";
  std::optional<unsigned short> serve_port;
  srun->add_option("--task", task, "patterns | sliding | vibro")->required();
  srun->add_option("--responder", responder, "observer | console")->required();
  srun->add_option("--seed", seed, "schedule and noise seed")->required();
  srun->add_option("--participant", participant);
  srun->add_option("--serve", serve_port, "serve the session for the console on this port");
  add_out(srun);
  auto* analyze_cmd = study->add_subcommand("analyze", "confusion matrix and statistics of a trial log");
  fs::path in;
  analyze_cmd->add_option("--in", in, "trial log (JSONL)")->required();
  add_out(analyze_cmd);

  // serve
  auto* serve = app.add_subcommand("serve", "session service for the experimenter console");
  std::optional<std::string> host;
  std::optional<unsigned short> port;
  std::optional<fs::path> log_dir;
  bool realtime = false;
  serve->add_option("--host", host);
  serve->add_option("--port", port);
  serve->add_option("--log-dir", log_dir, "JSONL log directory");
  serve->add_flag("--realtime", realtime, "wall-clock sessions instead of the simulated clock");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    SystemConfig config = config_path.empty() ? SystemConfig{} : SystemConfig::from_file(config_path);

    if (*sim_run) {
      sim_opts.mode = parse_render_mode(mode);
      sim_opts.out = app::output_dir(out);
      sim_opts.force = force;
      config.seed = seed;
      print(app::sim_run(sim_opts, config));
    } else if (*sweep || *step || *dur) {
      BenchSetup bench = config.bench();
      apply_preset(bench, preset);
      const fs::path dir = app::output_dir(out);
      if (*sweep)
        print(import ? app::characterize_sweep_import(*import, dir, force) : app::characterize_sweep(plan, bench, dir, force));
      else if (*step)
        print(import ? app::characterize_step_import(*import, dir, force) : app::characterize_step(bench, dir, force));
      else
        print(import ? app::characterize_durability_import(*import, dplan.period, dir, force)
                     : app::characterize_durability(dplan, bench, dir, force));
    } else if (*srun) {
      const TaskKind kind = parse_task_kind(task);
      if (responder == "observer") {
        if (serve_port) throw ConfigError("--serve applies to the console responder only");
        print(app::study_run(kind, seed, participant, config, app::output_dir(out), force));
      } else if (responder == "console") {
        if (!serve_port) throw ConfigError("the console responder needs the session service: pass --serve PORT");
        config.service.port = *serve_port;
        if (out) config.service.log_dir = *out;
        SessionManager manager(config);
        HttpService service(manager, config.service);
        auto created = manager.create({{"task", task}, {"seed", seed}, {"participant", participant}});
        created["port"] = service.port();
        print(created);
        service.run_until_signal();
      } else {
        throw ValidationError("unknown responder '" + responder + "' (expected observer or console)");
      }
    } else if (*analyze_cmd) {
      print(app::study_analyze(in, out, force));
    } else if (*serve) {
      if (host) config.service.host = *host;
      if (port) config.service.port = *port;
      if (log_dir) config.service.log_dir = *log_dir;
      if (realtime) config.service.realtime = true;
      SessionManager manager(config);
      HttpService service(manager, config.service);
      print({{"host", config.service.host},
             {"port", service.port()},
             {"clock", config.service.realtime ? "realtime" : "simulated"}});
      service.run_until_signal();
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e);
  }
  return 0;
}
