// amlab: config-driven experiment runner for the associative-memory /
// probabilistic-modeling laboratory. Subcommands: landscape, cluster,
// capacity, icl-train, icl-eval, attn-check.
//
// Conventions: all randomness derives from --seed; identical invocations
// produce byte-identical result CSV/JSON files. Exit 0 on success, 2 on
// config errors, 1 on runtime failures (structured record on stderr).

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "am/attnnorm.hpp"
#include "am/capacity.hpp"
#include "am/clustering.hpp"
#include "am/config.hpp"
#include "am/csvio.hpp"
#include "am/dynamics.hpp"
#include "am/energy.hpp"
#include "am/iclebm.hpp"
#include "am/latent.hpp"
#include "am/numerics.hpp"
#include "am/rng.hpp"

namespace fs = std::filesystem;
using am::Config;
using am::ConfigValue;

namespace {

constexpr const char* kVersion = "amlab 0.1.0";

struct CommonArgs {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string out_dir;
    int jobs = 1;
};

fs::path resolve_out_dir(const std::string& out) {
    fs::path p(out);
    if (p.is_relative()) {
        if (const char* root = std::getenv("AMLAB_OUT")) p = fs::path(root) / p;
    }
    fs::create_directories(p);
    return p;
}

Config load_config(const CommonArgs& args, const std::vector<std::string>& known) {
    Config cfg = args.config_path.empty() ? Config() : Config::parse_file(args.config_path);
    // flags override config keys
    if (args.seed_set) cfg.set("seed", ConfigValue{static_cast<double>(args.seed)});
    if (!args.out_dir.empty()) cfg.set("out", ConfigValue{args.out_dir});
    if (args.jobs > 1) cfg.set("jobs", ConfigValue{static_cast<double>(args.jobs)});
    cfg.require_known(known);
    return cfg;
}

// resolved config + seed + version; wall clock goes to the stamp only so
// result files stay byte-identical across reruns
void write_run_stamp(const fs::path& dir, const Config& cfg, const std::string& command) {
    am::write_text_file((dir / "resolved_config.toml").string(), cfg.dump());
    nlohmann::ordered_json stamp;
    stamp["tool"] = kVersion;
    stamp["command"] = command;
    stamp["seed"] = cfg.get_int("seed", 0);
    const auto now = std::chrono::system_clock::now().time_since_epoch();
    stamp["wall_clock_unix_ms"] =
        std::chrono::duration_cast<std::chrono::milliseconds>(now).count();
    am::write_text_file((dir / "runstamp.json").string(), stamp.dump(2) + "\n");
}

am::Tensor tensor_from_flat(const std::vector<double>& flat, std::int64_t dim,
                            const char* what) {
    if (dim < 1 || flat.empty() || flat.size() % static_cast<std::size_t>(dim) != 0)
        throw am::ConfigError(std::string(what) + " length must be a positive multiple of dim");
    return am::Tensor({static_cast<std::int64_t>(flat.size()) / dim, dim},
                      std::vector<double>(flat));
}

// ------------------------------------------------------------- landscape

int run_landscape(const CommonArgs& args) {
    Config cfg = load_config(args, {"model", "dim", "memories", "patterns", "beta", "sigma",
                                    "alpha", "alpha_values", "discount", "rho", "counts",
                                    "grid_min", "grid_max", "resolution", "seed", "out",
                                    "jobs"});
    const auto out = resolve_out_dir(cfg.get_string("out", "out/landscape"));
    write_run_stamp(out, cfg, "landscape");

    const std::string model = cfg.get_string("model", "clam");
    const auto dim = cfg.get_int("dim", 2);
    if (dim != 2) throw am::ConfigError("landscape renders 2-D grids; dim must be 2");
    const double lo = cfg.get_number("grid_min", -6.0);
    const double hi = cfg.get_number("grid_max", 6.0);
    const auto res = cfg.get_int("resolution", 64);
    if (res < 2) throw am::ConfigError("resolution must be >= 2");

    auto grid_csv = [&](const am::EnergyModel& e) {
        std::string csv = "x,y,energy\n";
        for (std::int64_t iy = 0; iy < res; ++iy)
            for (std::int64_t ix = 0; ix < res; ++ix) {
                const double x = lo + (hi - lo) * ix / static_cast<double>(res - 1);
                const double y = lo + (hi - lo) * iy / static_cast<double>(res - 1);
                csv += am::csv_line({am::format_double(x), am::format_double(y),
                                     am::format_double(e.energy(std::vector<double>{x, y}))});
            }
        return csv;
    };

    const double beta = cfg.get_number("beta", 1.0);
    if (model == "hopfield" || model == "mchn" || model == "kde") {
        am::PatternSet p(tensor_from_flat(cfg.get_numbers("patterns", {}), dim, "patterns"));
        if (model == "hopfield") {
            am::HopfieldEnergy e(std::move(p));
            am::write_text_file((out / "grid.csv").string(), grid_csv(e));
        } else if (model == "mchn") {
            am::MchnEnergy e(std::move(p), beta);
            am::write_text_file((out / "grid.csv").string(), grid_csv(e));
        } else {
            am::KdeEnergy e(am::KdeModel(std::move(p), cfg.get_number("sigma", 1.0)));
            am::write_text_file((out / "grid.csv").string(), grid_csv(e));
        }
        return 0;
    }
    if (model == "clam") {
        am::ClamEnergy e(am::ClamModel(
            tensor_from_flat(cfg.get_numbers("memories", {}), dim, "memories"), beta));
        am::write_text_file((out / "grid.csv").string(), grid_csv(e));
        return 0;
    }
    if (model == "crp_clam") {
        const auto mem = tensor_from_flat(cfg.get_numbers("memories", {}), dim, "memories");
        auto counts = cfg.get_numbers("counts", std::vector<double>(mem.dim(0), 1.0));
        const double discount = cfg.get_number("discount", 0.0);
        const double rho = cfg.get_number("rho", 1.0);
        const auto alphas = cfg.get_numbers("alpha_values",
                                            {cfg.get_number("alpha", 1.0)});
        for (const double alpha : alphas) {
            am::CrpClamEnergy e(am::CrpState(alpha, discount, mem,
                                             std::vector<double>(counts), beta, rho));
            const std::string name = "grid_alpha_" + am::format_double(alpha) + ".csv";
            am::write_text_file((out / name).string(), grid_csv(e));
        }
        return 0;
    }
    throw am::ConfigError("unknown model '" + model + "'");
}

// --------------------------------------------------------------- cluster

int run_cluster(const CommonArgs& args) {
    Config cfg = load_config(args, {"dataset", "algo", "k", "beta", "rollout_steps",
                                    "rollout_dt", "lr", "epochs", "restarts", "init",
                                    "standardize", "blob_clusters", "blob_per_cluster",
                                    "blob_dim", "blob_box", "blob_std", "seed", "out",
                                    "jobs"});
    const auto out = resolve_out_dir(cfg.get_string("out", "out/cluster"));
    write_run_stamp(out, cfg, "cluster");
    const auto seed = static_cast<std::uint64_t>(cfg.get_int("seed", 0));

    const std::string source = cfg.get_string("dataset", "blobs");
    am::Dataset data;
    if (source == "blobs") {
        data = am::make_blobs(cfg.get_int("blob_clusters", 3),
                              cfg.get_int("blob_per_cluster", 64),
                              cfg.get_int("blob_dim", 2), cfg.get_number("blob_box", 6.0),
                              cfg.get_number("blob_std", 0.7), seed);
    } else {
        data = am::load_csv(source);
    }
    if (cfg.get_bool("standardize", true))
        data.features = am::standardize(data.features);

    const auto k = cfg.get_int("k", data.labels ? data.classes() : 3);
    const std::string algo = cfg.get_string("algo", "clam");

    std::vector<int> labels;
    if (algo == "kmeans") {
        labels = am::kmeans(data.features, k, cfg.get_int("restarts", 10), seed).labels;
    } else if (algo == "clam" || algo == "clam_elbo") {
        am::TrainConfig tc;
        tc.k = k;
        tc.beta = cfg.get_number("beta", 2.0);
        tc.rollout_steps = cfg.get_int("rollout_steps", 15);
        tc.rollout_dt = cfg.get_number("rollout_dt", 0.1);
        tc.lr = cfg.get_number("lr", 0.05);
        tc.epochs = cfg.get_int("epochs", 120);
        tc.restarts = cfg.get_int("restarts", 3);
        tc.seed = seed;
        tc.init = cfg.get_string("init", "kmeans++") == "sample"
                      ? am::MemoryInit::Sample
                      : am::MemoryInit::KmeansPlusPlus;
        auto trained = am::train_clam(data, tc);
        labels = am::assign(trained.model, data.features,
                            algo == "clam_elbo" ? am::AssignPath::Soft
                                                : am::AssignPath::Hard)
                     .labels;
    } else {
        throw am::ConfigError("unknown algo '" + algo + "'");
    }

    const am::MetricReport report = am::metric_report(data.features, labels, data.labels);
    am::write_text_file((out / "report.json").string(), am::metric_report_json(report));
    std::string labels_csv = "index,label\n";
    for (std::size_t i = 0; i < labels.size(); ++i)
        labels_csv += am::csv_line({std::to_string(i), std::to_string(labels[i])});
    am::write_text_file((out / "labels.csv").string(), labels_csv);
    return 0;
}

// -------------------------------------------------------------- capacity

int run_capacity(const CommonArgs& args) {
    Config cfg = load_config(args, {"dims", "ns", "sigma", "m", "m_rule",
                                    "queries_per_pattern", "perturbation", "seeds",
                                    "probes_per_pattern", "check_storage", "seed", "out",
                                    "jobs"});
    const auto out = resolve_out_dir(cfg.get_string("out", "out/capacity"));
    write_run_stamp(out, cfg, "capacity");

    const auto dims = cfg.get_numbers("dims", {2, 4, 8, 16});
    const auto ns = cfg.get_numbers("ns", {64});
    const double sigma = cfg.get_number("sigma", 1.0);
    const std::string m_rule = cfg.get_string("m_rule", "2sqrt(D-1)");
    const double m_fixed = cfg.get_number("m", 0.0);
    const auto qpp = cfg.get_int("queries_per_pattern", 10);
    const double perturbation = cfg.get_number("perturbation", 0.25);
    const auto base_seed = static_cast<std::uint64_t>(cfg.get_int("seed", 0));
    std::vector<double> seed_list = cfg.get_numbers("seeds", {});
    if (seed_list.empty())
        for (int s = 0; s < 5; ++s) seed_list.push_back(static_cast<double>(s));
    const bool with_storage = cfg.get_bool("check_storage", false);
    const auto probes = cfg.get_int("probes_per_pattern", 10);
    const int jobs = std::max<int>(1, static_cast<int>(cfg.get_int("jobs", 1)));

    struct Cell {
        std::int64_t d, n;
        double m;
        std::uint64_t seed;
    };
    std::vector<Cell> cells;
    for (const double dd : dims)
        for (const double nn : ns)
            for (const double sd : seed_list) {
                const auto d = static_cast<std::int64_t>(dd);
                const double m = m_rule == "fixed"
                                     ? m_fixed
                                     : 2.0 * std::sqrt(static_cast<double>(d - 1));
                cells.push_back({d, static_cast<std::int64_t>(nn), m,
                                 static_cast<std::uint64_t>(sd)});
            }

    struct Row {
        Cell cell;
        am::RetrievalResult r;
        double stored_fraction = -1.0;
    };
    std::vector<Row> rows(cells.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cells.size()) return;
            const Cell& c = cells[i];
            am::Rng cell_rng = am::Rng(base_seed).child(i);
            const std::uint64_t cell_seed = cell_rng.next_u64() ^ c.seed;
            rows[i].cell = c;
            rows[i].r = am::retrieval_experiment(c.d, c.n, c.m, sigma, qpp,
                                                 perturbation, cell_seed);
            if (with_storage) {
                am::Rng probe_rng = cell_rng.child(1);
                const am::PatternSet p =
                    am::sphere_sample(c.d, c.m, c.n, probe_rng);
                rows[i].stored_fraction =
                    am::check_storage(p, sigma, probes, 1e9, probe_rng).stored_fraction;
            }
        }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    std::string csv = "D,N,M,sigma,seed,ratio_a,ratio_b,stored_fraction\n";
    for (const Row& row : rows) {
        csv += am::csv_line({std::to_string(row.cell.d), std::to_string(row.cell.n),
                             am::format_double(row.cell.m), am::format_double(sigma),
                             std::to_string(row.cell.seed),
                             am::format_double(row.r.ratio_initial),
                             am::format_double(row.r.ratio_pairwise),
                             row.stored_fraction < 0.0
                                 ? std::string("")
                                 : am::format_double(row.stored_fraction)});
    }
    am::write_text_file((out / "results.csv").string(), csv);
    return 0;
}

// ------------------------------------------------------------- icl-train

int run_icl_train(const CommonArgs& args) {
    Config cfg = load_config(args, {"layers", "heads", "width", "context_len", "batch",
                                    "steps", "negatives", "langevin_steps",
                                    "langevin_step_size", "noise_scale", "init_box", "lr",
                                    "clip_norm", "seed", "out", "jobs", "log_every"});
    const auto out = resolve_out_dir(cfg.get_string("out", "out/icl"));
    write_run_stamp(out, cfg, "icl-train");

    am::IclConfig mc;
    mc.layers = static_cast<int>(cfg.get_int("layers", 2));
    mc.heads = static_cast<int>(cfg.get_int("heads", 4));
    mc.width = static_cast<int>(cfg.get_int("width", 32));
    const auto context_len = cfg.get_int("context_len", 64);
    mc.max_positions = static_cast<int>(context_len + 1);
    mc.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 0));
    am::IclEbmModel model(mc);

    am::CdConfig cd;
    cd.langevin_steps = cfg.get_int("langevin_steps", 15);
    cd.langevin_step_size = cfg.get_number("langevin_step_size", 3.16);
    cd.noise_scale = cfg.get_number("noise_scale", 0.01);
    cd.negatives_per_position = cfg.get_int("negatives", 8);
    cd.init_box = cfg.get_number("init_box", 6.0);
    cd.lr = cfg.get_number("lr", 1e-3);
    cd.clip_norm = cfg.get_number("clip_norm", 1.0);
    cd.seed = mc.seed;
    am::CdTrainer trainer(model, cd);

    const auto batch_size = cfg.get_int("batch", 8);
    const auto steps = cfg.get_int("steps", 200);
    const auto log_every = cfg.get_int("log_every", 10);
    const std::int64_t l = context_len + 1;

    am::Rng rng(mc.seed);
    std::string loss_csv = "step,loss,skipped\n";
    for (std::int64_t step = 0; step < steps; ++step) {
        am::ContextBatch batch;
        batch.b = batch_size;
        batch.l = l;
        batch.tokens = am::Tensor({batch_size * l, 2});
        for (std::int64_t s = 0; s < batch_size; ++s) {
            const std::uint64_t task_seed = rng.next_u64();
            batch.task_seeds.push_back(task_seed);
            am::TaskSampler task(task_seed);
            am::Rng draw_rng = rng.child(step * batch_size + s);
            const am::Tensor seq = task.draw_many(l, draw_rng);
            std::copy_n(seq.data(), l * 2, batch.tokens.data() + s * l * 2);
        }
        const auto r = trainer.step(batch, rng);
        if (step % log_every == 0 || step + 1 == steps)
            loss_csv += am::csv_line({std::to_string(step), am::format_double(r.loss),
                                      std::to_string(r.skipped_negatives)});
    }
    am::write_text_file((out / "loss.csv").string(), loss_csv);
    am::save_checkpoint(model, (out / "model.ckpt").string());
    return 0;
}

// -------------------------------------------------------------- icl-eval

int run_icl_eval(const CommonArgs& args) {
    Config cfg = load_config(args, {"checkpoint", "context_lengths", "eval_tasks",
                                    "eval_points", "resolution", "grid_box", "init_box",
                                    "seed", "out", "jobs"});
    const auto out = resolve_out_dir(cfg.get_string("out", "out/icl-eval"));
    write_run_stamp(out, cfg, "icl-eval");

    const std::string ckpt = cfg.get_string("checkpoint", "");
    if (ckpt.empty()) throw am::ConfigError("checkpoint path is required");
    const am::IclEbmModel model = am::load_checkpoint(ckpt);

    const auto context_lengths = cfg.get_numbers("context_lengths", {4, 64});
    const auto eval_tasks = cfg.get_int("eval_tasks", 16);
    const auto eval_points = cfg.get_int("eval_points", 32);
    const double box = cfg.get_number("grid_box", 6.0);
    const auto seed = static_cast<std::uint64_t>(cfg.get_int("seed", 1));

    nlohmann::ordered_json gaps = nlohmann::ordered_json::array();
    am::Rng rng(seed);
    for (const double cl : context_lengths) {
        const auto context_len = static_cast<std::int64_t>(cl);
        if (context_len + 1 > model.config().max_positions)
            throw am::ConfigError("context length exceeds the checkpoint's positions");
        double gap_sum = 0.0;
        std::vector<double> task_gaps;
        for (std::int64_t t = 0; t < eval_tasks; ++t) {
            am::TaskSampler task(rng.next_u64());
            am::Rng draw = rng.child(1000 + t);
            const am::Tensor context = task.draw_many(context_len, draw);
            am::IclConditionalEnergy energy(model, context);
            double e_real = 0.0, e_unif = 0.0;
            for (std::int64_t i = 0; i < eval_points; ++i) {
                e_real += energy.energy(task.draw(draw));
                e_unif += energy.energy(std::vector<double>{draw.uniform(-box, box),
                                                            draw.uniform(-box, box)});
            }
            const double gap =
                (e_unif - e_real) / static_cast<double>(eval_points);
            task_gaps.push_back(gap);
            gap_sum += gap;
        }
        nlohmann::ordered_json entry;
        entry["context_length"] = context_len;
        entry["mean_gap"] = gap_sum / static_cast<double>(eval_tasks);
        entry["task_gaps"] = task_gaps;
        gaps.push_back(std::move(entry));
    }
    nlohmann::ordered_json doc;
    doc["gaps"] = std::move(gaps);
    am::write_text_file((out / "gaps.json").string(), doc.dump(2) + "\n");

    // grid of the first eval task at the longest context, for plotting
    {
        am::TaskSampler task(am::Rng(seed).next_u64());
        am::Rng draw = am::Rng(seed).child(1000);
        const auto context_len =
            static_cast<std::int64_t>(context_lengths.back());
        const am::Tensor context = task.draw_many(context_len, draw);
        am::GridSpec spec;
        spec.x_min = spec.y_min = -box;
        spec.x_max = spec.y_max = box;
        spec.resolution = cfg.get_int("resolution", 48);
        const am::EnergyGrid grid = am::energy_grid(model, context, spec);
        std::string csv = "x,y,energy\n";
        for (std::int64_t iy = 0; iy < spec.resolution; ++iy)
            for (std::int64_t ix = 0; ix < spec.resolution; ++ix)
                csv += am::csv_line({am::format_double(grid.x_at(ix)),
                                     am::format_double(grid.y_at(iy)),
                                     am::format_double(grid.value(iy, ix))});
        am::write_text_file((out / "grid.csv").string(), csv);
    }
    return 0;
}

// ------------------------------------------------------------ attn-check

int run_attn_check(const CommonArgs& args) {
    Config cfg = load_config(args, {"instances", "keys", "dim", "seed", "out", "jobs"});
    const auto out = resolve_out_dir(cfg.get_string("out", "out/attn"));
    write_run_stamp(out, cfg, "attn-check");

    const auto instances = cfg.get_int("instances", 1000);
    const auto n_keys = cfg.get_int("keys", 8);
    const auto dim = cfg.get_int("dim", 16);
    am::Rng rng(static_cast<std::uint64_t>(cfg.get_int("seed", 0)));

    std::string csv = "instance,max_abs_error,norm_warning\n";
    for (std::int64_t i = 0; i < instances; ++i) {
        am::Tensor keys = am::Tensor::randn({n_keys, dim}, rng);
        std::vector<double> gamma(dim), delta(dim), q_tilde(dim);
        for (auto& v : gamma) v = rng.normal();
        for (auto& v : delta) v = rng.normal();
        double nrm = 0.0;
        for (auto& v : q_tilde) {
            v = rng.normal();
            nrm += v * v;
        }
        nrm = std::sqrt(nrm);
        for (auto& v : q_tilde) v /= nrm;
        const auto check = am::verify_identity(keys, gamma, delta, q_tilde);
        csv += am::csv_line({std::to_string(i), am::format_double(check.max_abs_error),
                             check.norm_warning ? "1" : "0"});
    }
    am::write_text_file((out / "errors.csv").string(), csv);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{kVersion};
    app.require_subcommand(1);

    CommonArgs args;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", args.config_path, "config file (flat key = value)");
        sub->add_option("--seed", args.seed, "master seed")->each([&](const std::string&) {
            args.seed_set = true;
        });
        sub->add_option("--out", args.out_dir, "output directory");
        sub->add_option("--jobs", args.jobs, "worker pool size");
    };

    auto* landscape = app.add_subcommand("landscape", "energy grids for any model");
    auto* cluster = app.add_subcommand("cluster", "train and evaluate clustering");
    auto* capacity = app.add_subcommand("capacity", "retrieval-ratio sweeps");
    auto* icl_train = app.add_subcommand("icl-train", "train the in-context EBM");
    auto* icl_eval = app.add_subcommand("icl-eval", "evaluate a checkpoint");
    auto* attn_check = app.add_subcommand("attn-check", "attention-norm identity errors");
    for (auto* sub : {landscape, cluster, capacity, icl_train, icl_eval, attn_check})
        add_common(sub);

    try {
        app.parse(argc, argv);
        if (landscape->parsed()) return run_landscape(args);
        if (cluster->parsed()) return run_cluster(args);
        if (capacity->parsed()) return run_capacity(args);
        if (icl_train->parsed()) return run_icl_train(args);
        if (icl_eval->parsed()) return run_icl_eval(args);
        if (attn_check->parsed()) return run_attn_check(args);
        return 2;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const am::ConfigError& e) {
        nlohmann::ordered_json err;
        err["error"] = "config";
        err["message"] = e.what();
        std::fprintf(stderr, "%s\n", err.dump().c_str());
        return 2;
    } catch (const std::exception& e) {
        nlohmann::ordered_json err;
        err["error"] = "runtime";
        err["message"] = e.what();
        std::fprintf(stderr, "%s\n", err.dump().c_str());
        return 1;
    }
}
