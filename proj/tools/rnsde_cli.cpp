// rnsde: command-line front end for the LACT reconstruction pipeline.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "rnsde/metrics.hpp"
#include "rnsde/mrsde.hpp"
#include "rnsde/phantom.hpp"
#include "rnsde/pinv.hpp"
#include "rnsde/restorer.hpp"
#include "rnsde/sampler.hpp"
#include "rnsde/score.hpp"
#include "rnsde/tomo.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rnsde;

namespace {

// exit codes: 0 ok, 2 usage/config, 3 missing dependency, 4 numerical failure
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DependencyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

json default_config() {
    return json{
        {"experiment", "default"},
        {"geometry", {{"size", 64}, {"angle_step", 2.0}, {"theta_miss", 90.0}}},
        {"schedule", {{"T", 100}, {"lambda2", 0.01}}},
        {"sampler",
         {{"rescale_alpha", 0.5},
          {"skip_beta", 3},
          {"travel_l", 1},
          {"travel_r", 1},
          {"sa_count", 4},
          {"seed", 0},
          {"clip_lo", -1.0},
          {"clip_hi", 2.0}}},
        {"dataset",
         {{"kind", "mixed"},
          {"n_train", 48},
          {"n_test", 24},
          {"min_shapes", 2},
          {"max_shapes", 6},
          {"seed", 0}}},
        {"score", {{"width", 16}, {"blocks", 3}, {"emb_dim", 16}, {"dropout", 0.1},
                   {"steps", 2000}, {"batch", 4}, {"lr", 5e-4}}},
        {"pinv", {{"postproc_width", 16}, {"postproc_blocks", 3},
                  {"phase1_steps", 3000}, {"phase2_steps", 1000}, {"phase2_alpha", 0.2},
                  {"batch", 2}, {"lr", 5e-4}}},
        {"restorer", {{"width", 16}, {"blocks", 3}, {"dropout", 0.1},
                      {"steps", 1500}, {"batch", 4}, {"lr", 1e-3}}},
        {"evaluate", {{"theta_miss", {60, 90, 120}}, {"lambda_tv", 5e-4}, {"tv_iters", 60},
                      {"sampler_runs", 10}, {"max_images", 0}}},
    };
}

void merge_into(json& base, const json& patch) {
    for (auto it = patch.begin(); it != patch.end(); ++it) {
        if (it->is_object() && base.contains(it.key()) && base[it.key()].is_object())
            merge_into(base[it.key()], *it);
        else
            base[it.key()] = *it;
    }
}

// --set a.b.c=value, with JSON-style literals (bare strings allowed)
void apply_override(json& cfg, const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got: " + kv);
    const std::string key = kv.substr(0, eq);
    const std::string val = kv.substr(eq + 1);

    json* node = &cfg;
    std::stringstream ss(key);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    if (parts.empty()) throw UsageError("--set: empty key");
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) node = &(*node)[parts[i]];

    json parsed = json::parse(val, nullptr, false);
    (*node)[parts.back()] = parsed.is_discarded() ? json(val) : parsed;
}

json load_config(const std::string& path, const std::vector<std::string>& overrides) {
    json cfg = default_config();
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw UsageError("cannot open config file: " + path);
        json user = json::parse(in, nullptr, false);
        if (user.is_discarded()) throw UsageError("config is not valid JSON: " + path);
        merge_into(cfg, user);
    }
    for (const auto& kv : overrides) apply_override(cfg, kv);
    return cfg;
}

Geometry geometry_from(const json& cfg) {
    const auto& g = cfg.at("geometry");
    return make_geometry(g.at("size").get<int>(), g.at("theta_miss").get<double>(),
                         g.at("angle_step").get<double>());
}

DiffusionSchedule schedule_from(const json& cfg) {
    const auto& s = cfg.at("schedule");
    return make_schedule(s.at("T").get<int>(), s.at("lambda2").get<double>());
}

SamplerConfig sampler_from(const json& cfg, std::optional<std::uint64_t> seed_override) {
    const auto& s = cfg.at("sampler");
    SamplerConfig sc;
    sc.rescale_alpha = s.at("rescale_alpha").get<double>();
    sc.skip_beta = s.at("skip_beta").get<int>();
    sc.travel_l = s.at("travel_l").get<int>();
    sc.travel_r = s.at("travel_r").get<int>();
    sc.sa_count = s.at("sa_count").get<int>();
    sc.seed = seed_override ? *seed_override : s.at("seed").get<std::uint64_t>();
    sc.clip_lo = s.at("clip_lo").get<double>();
    sc.clip_hi = s.at("clip_hi").get<double>();
    return sc;
}

void require_file(const std::string& path, const std::string& what) {
    if (path.empty() || !fs::exists(path))
        throw DependencyError("missing " + what + ": " + (path.empty() ? "(not given)" : path));
}

struct RunReport {
    json j;
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

    RunReport(const std::string& cmd, const json& cfg,
              std::optional<std::uint64_t> seed) {
        j["command"] = cmd;
        j["config"] = cfg;
        if (seed) j["seed"] = *seed;
        j["inputs"] = json::object();
        j["outputs"] = json::object();
    }
    void input(const std::string& name, const std::string& path) {
        j["inputs"][name] = {{"path", path}, {"checksum", fnv1a_file(path)}};
    }
    void output(const std::string& name, const std::string& path) {
        j["outputs"][name] = {{"path", path}, {"checksum", fnv1a_file(path)}};
    }
    void write(const fs::path& dir) {
        j["wall_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now() - t0)
                           .count();
        fs::create_directories(dir);
        std::ofstream out(dir / "report.json");
        out << j.dump(2) << "\n";
    }
};

CondDenoiser load_score_model(const std::string& path, const DiffusionSchedule& sched) {
    require_file(path, "score checkpoint");
    std::map<std::string, std::string> meta;
    ParamStore tmp;
    load_params(path, tmp, &meta);
    DenoiserConfig dc;
    dc.width = std::stoi(meta.at("width"));
    dc.blocks = std::stoi(meta.at("blocks"));
    dc.emb_dim = std::stoi(meta.at("emb_dim"));
    Rng rng(0);
    CondDenoiser model(dc, sched, rng);
    load_params(path, model.params());
    return model;
}

Restorer load_restorer_model(const std::string& path) {
    require_file(path, "restorer checkpoint");
    std::map<std::string, std::string> meta;
    ParamStore tmp;
    load_params(path, tmp, &meta);
    RestorerConfig rc;
    rc.width = std::stoi(meta.at("width"));
    rc.blocks = std::stoi(meta.at("blocks"));
    Rng rng(0);
    Restorer model(rc, rng);
    load_params(path, model.params());
    return model;
}

json scores_json(const MethodScores& s) {
    return json{{"psnr", s.psnr}, {"ssim", s.ssim}, {"consistency", s.consistency}};
}

void write_trace_csv(const std::string& path, const SampleTrace& trace) {
    std::ofstream out(path);
    out << "t,consistency_error,rectified,phase\n";
    for (const auto& r : trace.records) {
        out << r.t << ",";
        if (std::isnan(r.consistency_error))
            out << "nan";
        else
            out << r.consistency_error;
        out << "," << (r.rectified ? 1 : 0) << "," << r.phase << "\n";
    }
}

std::vector<std::string> split_csl(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"rnsde: limited-angle CT reconstruction with mean-reverting diffusion"};
    app.require_subcommand(0, 1);

    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    int threads = 1;
    bool want_png = false;
    app.add_option("--config", config_path, "JSON config file (defaults used when absent)");
    app.add_option("--set", overrides, "override config entries, key.path=value");
    app.add_option("--seed", seed, "override all RNG seeds for this run");
    app.add_option("--threads", threads, "bound on worker threads")->check(CLI::PositiveNumber);
    app.add_flag("--export-png", want_png, "also write PNG previews of images");

    std::string out_dir, data_path, image_path, sino_path, mu_path;
    std::string score_ckpt, pinv_ckpt, restorer_ckpt;
    std::vector<std::string> pinv_list;
    std::string sweep = "T=50,100,200";
    bool print_defaults = false;
    app.add_flag("--print-defaults", print_defaults, "print the default config and exit");

    auto* dataset = app.add_subcommand("dataset", "dataset utilities");
    auto* ds_build = dataset->add_subcommand("build", "generate phantoms + sinograms + FBP");
    ds_build->add_option("--out", out_dir, "output directory")->required();

    auto* project = app.add_subcommand("project", "radon-project an image");
    project->add_option("--image", image_path, "input image (.rnt)")->required();
    project->add_option("--out", out_dir, "output directory")->required();

    auto* fbp_cmd = app.add_subcommand("fbp", "filtered back-projection of a sinogram");
    fbp_cmd->add_option("--sino", sino_path, "input sinogram (.rnt)")->required();
    fbp_cmd->add_option("--out", out_dir, "output directory")->required();

    auto* tr_pinv = app.add_subcommand("train-pinv", "train the learnable pseudo-inverse");
    tr_pinv->add_option("--data", data_path, "dataset manifest.json")->required();
    tr_pinv->add_option("--out", out_dir, "output directory")->required();

    auto* tr_score = app.add_subcommand("train-score", "train the conditional denoiser");
    tr_score->add_option("--data", data_path, "dataset manifest.json")->required();
    tr_score->add_option("--out", out_dir, "output directory")->required();

    auto* tr_rest = app.add_subcommand("train-restorer", "train the MMSE post-processor");
    tr_rest->add_option("--data", data_path, "dataset manifest.json")->required();
    tr_rest->add_option("--out", out_dir, "output directory")->required();

    auto* sample_cmd = app.add_subcommand("sample", "reverse-diffusion reconstruction");
    sample_cmd->add_option("--sino", sino_path, "measured sinogram (.rnt)")->required();
    sample_cmd->add_option("--score", score_ckpt, "score checkpoint")->required();
    sample_cmd->add_option("--pinv", pinv_ckpt, "pseudo-inverse checkpoint (omit: no rectification)");
    sample_cmd->add_option("--mu", mu_path, "conditioning image (default: FBP of --sino)");
    sample_cmd->add_option("--out", out_dir, "output directory")->required();

    auto* eval_cmd = app.add_subcommand("evaluate", "metric table over the test split");
    eval_cmd->add_option("--data", data_path, "dataset manifest.json")->required();
    eval_cmd->add_option("--score", score_ckpt, "score checkpoint")->required();
    eval_cmd->add_option("--pinv", pinv_list, "theta=path pseudo-inverse checkpoints")->required();
    eval_cmd->add_option("--out", out_dir, "output directory")->required();

    auto* ablate_cmd = app.add_subcommand("ablate", "schedule-length sweep");
    ablate_cmd->add_option("--data", data_path, "dataset manifest.json")->required();
    ablate_cmd->add_option("--sweep", sweep, "e.g. T=50,100,200");
    ablate_cmd->add_option("--pinv", pinv_ckpt, "pseudo-inverse checkpoint (optional)");
    ablate_cmd->add_option("--out", out_dir, "output directory")->required();

    // global flags (--set, --seed, ...) may appear after the subcommand name
    for (CLI::App* s : {static_cast<CLI::App*>(dataset), static_cast<CLI::App*>(ds_build),
                        static_cast<CLI::App*>(project), static_cast<CLI::App*>(fbp_cmd),
                        static_cast<CLI::App*>(tr_pinv), static_cast<CLI::App*>(tr_score),
                        static_cast<CLI::App*>(tr_rest), static_cast<CLI::App*>(sample_cmd),
                        static_cast<CLI::App*>(eval_cmd), static_cast<CLI::App*>(ablate_cmd)})
        s->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (print_defaults) {
            std::cout << default_config().dump(2) << "\n";
            return 0;
        }
        if (app.get_subcommands().empty()) throw UsageError("no subcommand given (see --help)");
        json cfg = load_config(config_path, overrides);
        const fs::path out(out_dir);

        if (*ds_build) {
            RunReport rep("dataset build", cfg, seed);
            const auto& d = cfg.at("dataset");
            PhantomSpec spec;
            spec.size = cfg.at("geometry").at("size").get<int>();
            spec.kind = phantom_kind_from_string(d.at("kind").get<std::string>());
            spec.min_shapes = d.at("min_shapes").get<int>();
            spec.max_shapes = d.at("max_shapes").get<int>();
            spec.seed = seed ? *seed : d.at("seed").get<std::uint64_t>();
            Geometry geom = geometry_from(cfg);
            DatasetManifest m = build_dataset(spec, d.at("n_train").get<int>(),
                                              d.at("n_test").get<int>(), geom, out_dir);
            rep.output("manifest", (out / "manifest.json").string());
            rep.j["n_train"] = m.train.size();
            rep.j["n_test"] = m.test.size();
            rep.write(out);
        } else if (*project) {
            RunReport rep("project", cfg, seed);
            require_file(image_path, "input image");
            rep.input("image", image_path);
            Tensor img = load_tensor(image_path);
            Geometry geom = make_geometry(img.dim(1), cfg.at("geometry").at("theta_miss").get<double>(),
                                          cfg.at("geometry").at("angle_step").get<double>());
            Sinogram s = radon(img, geom);
            fs::create_directories(out);
            save_tensor((out / "sino.rnt").string(), s.values);
            rep.output("sino", (out / "sino.rnt").string());
            rep.write(out);
        } else if (*fbp_cmd) {
            RunReport rep("fbp", cfg, seed);
            require_file(sino_path, "input sinogram");
            rep.input("sino", sino_path);
            Geometry geom = geometry_from(cfg);
            Tensor sv = load_tensor(sino_path);
            if (sv.dim(0) != geom.num_angles() || sv.dim(1) != geom.num_detectors)
                throw UsageError("sinogram shape does not match configured geometry");
            Tensor img = fbp({geom, std::move(sv)}, geom.num_detectors);
            fs::create_directories(out);
            save_tensor((out / "fbp.rnt").string(), img);
            rep.output("fbp", (out / "fbp.rnt").string());
            if (want_png) {
                export_png((out / "fbp.png").string(), img);
                rep.output("fbp_png", (out / "fbp.png").string());
            }
            rep.write(out);
        } else if (*tr_pinv) {
            RunReport rep("train-pinv", cfg, seed);
            require_file(data_path, "dataset manifest");
            rep.input("manifest", data_path);
            DatasetManifest m = load_manifest(data_path);
            Geometry geom = make_geometry(m.num_detectors, m.theta_miss_deg, m.angle_step_deg);
            std::vector<Tensor> train = load_split_images(m, "train");

            const auto& p = cfg.at("pinv");
            PinvConfig pc{p.at("postproc_width").get<int>(), p.at("postproc_blocks").get<int>()};
            TrainPinvConfig tc;
            tc.phase1_steps = p.at("phase1_steps").get<int>();
            tc.phase2_steps = p.at("phase2_steps").get<int>();
            tc.phase2_alpha = p.at("phase2_alpha").get<double>();
            tc.batch = p.at("batch").get<int>();
            tc.lr = p.at("lr").get<double>();
            tc.seed = seed.value_or(0);
            Rng init(tc.seed);
            LearnablePinv model(geom, m.spec.size, pc, init);
            TrainPinvReport tr = train_pinv(train, model, tc);
            fs::create_directories(out);
            model.save((out / "pinv.rnt").string());
            rep.output("checkpoint", (out / "pinv.rnt").string());
            rep.j["initial_l1"] = tr.l1_curve.front();
            rep.j["best_l1"] = tr.best_l1;
            rep.write(out);
        } else if (*tr_score) {
            RunReport rep("train-score", cfg, seed);
            require_file(data_path, "dataset manifest");
            rep.input("manifest", data_path);
            DatasetManifest m = load_manifest(data_path);
            std::vector<Tensor> imgs = load_split_images(m, "train");
            std::vector<Tensor> mus = load_split_fbp(m, "train");
            std::vector<PairedSample> ds;
            for (std::size_t i = 0; i < imgs.size(); ++i)
                ds.push_back({std::move(imgs[i]), std::move(mus[i])});

            DiffusionSchedule sched = schedule_from(cfg);
            const auto& s = cfg.at("score");
            DenoiserConfig dc;
            dc.width = s.at("width").get<int>();
            dc.blocks = s.at("blocks").get<int>();
            dc.emb_dim = s.at("emb_dim").get<int>();
            dc.dropout = s.at("dropout").get<float>();
            TrainScoreConfig tc;
            tc.steps = s.at("steps").get<int>();
            tc.batch = s.at("batch").get<int>();
            tc.lr = s.at("lr").get<double>();
            tc.seed = seed.value_or(0);
            Rng init(tc.seed);
            CondDenoiser model(dc, sched, init);
            std::vector<double> curve = train_score(ds, sched, model, tc);
            fs::create_directories(out);
            save_params((out / "score.rnt").string(), model.params(),
                        {{"width", std::to_string(dc.width)},
                         {"blocks", std::to_string(dc.blocks)},
                         {"emb_dim", std::to_string(dc.emb_dim)},
                         {"T", std::to_string(sched.T)}});
            rep.output("checkpoint", (out / "score.rnt").string());
            rep.j["initial_loss"] = curve.front();
            rep.j["final_loss"] = curve.back();
            rep.write(out);
        } else if (*tr_rest) {
            RunReport rep("train-restorer", cfg, seed);
            require_file(data_path, "dataset manifest");
            rep.input("manifest", data_path);
            DatasetManifest m = load_manifest(data_path);
            std::vector<Tensor> gt = load_split_images(m, "train");
            std::vector<Tensor> fb = load_split_fbp(m, "train");
            std::vector<RestorerPair> train_set, val_set;
            for (std::size_t i = 0; i < gt.size(); ++i) {
                if (i % 8 == 7)
                    val_set.push_back({fb[i], gt[i]});
                else
                    train_set.push_back({fb[i], gt[i]});
            }
            const auto& r = cfg.at("restorer");
            RestorerConfig rc;
            rc.width = r.at("width").get<int>();
            rc.blocks = r.at("blocks").get<int>();
            rc.dropout = r.at("dropout").get<float>();
            TrainRestorerConfig tc;
            tc.steps = r.at("steps").get<int>();
            tc.batch = r.at("batch").get<int>();
            tc.lr = r.at("lr").get<double>();
            tc.seed = seed.value_or(0);
            Rng init(tc.seed);
            Restorer model(rc, init);
            std::vector<double> curve = train_restorer(train_set, val_set, model, tc);
            fs::create_directories(out);
            save_params((out / "restorer.rnt").string(), model.params(),
                        {{"width", std::to_string(rc.width)},
                         {"blocks", std::to_string(rc.blocks)}});
            rep.output("checkpoint", (out / "restorer.rnt").string());
            rep.j["initial_loss"] = curve.front();
            rep.j["final_loss"] = curve.back();
            rep.write(out);
        } else if (*sample_cmd) {
            RunReport rep("sample", cfg, seed);
            require_file(sino_path, "input sinogram");
            rep.input("sino", sino_path);
            DiffusionSchedule sched = schedule_from(cfg);
            CondDenoiser model = load_score_model(score_ckpt, sched);
            rep.input("score", score_ckpt);

            std::optional<LearnablePinv> pinv;
            if (!pinv_ckpt.empty()) {
                require_file(pinv_ckpt, "pseudo-inverse checkpoint");
                pinv = LearnablePinv::load(pinv_ckpt);
                rep.input("pinv", pinv_ckpt);
            }
            Geometry geom = pinv ? pinv->geometry() : geometry_from(cfg);
            Tensor sv = load_tensor(sino_path);
            if (sv.dim(0) != geom.num_angles() || sv.dim(1) != geom.num_detectors)
                throw UsageError("sinogram shape does not match geometry");
            Sinogram y{geom, std::move(sv)};

            Tensor mu;
            if (!mu_path.empty()) {
                require_file(mu_path, "conditioning image");
                rep.input("mu", mu_path);
                mu = load_tensor(mu_path);
            } else {
                mu = fbp(y, geom.num_detectors);
            }

            SamplerConfig sc = sampler_from(cfg, seed);
            fs::create_directories(out);
            if (sc.sa_count > 1) {
                Tensor avg = sample_average(y, mu, model, pinv ? &*pinv : nullptr, sched, sc);
                save_tensor((out / "image.rnt").string(), avg);
                if (want_png) export_png((out / "image.png").string(), avg);
            } else {
                SampleResult res = sample(y, mu, model, pinv ? &*pinv : nullptr, sched, sc);
                save_tensor((out / "image.rnt").string(), res.image);
                if (want_png) export_png((out / "image.png").string(), res.image);
                write_trace_csv((out / "trace.csv").string(), res.trace);
                rep.output("trace", (out / "trace.csv").string());
            }
            rep.output("image", (out / "image.rnt").string());
            if (want_png) rep.output("image_png", (out / "image.png").string());
            rep.j["T_tt"] = time_travel_steps(sched.T, sc.travel_l, sc.travel_r);
            rep.write(out);
        } else if (*eval_cmd) {
            RunReport rep("evaluate", cfg, seed);
            require_file(data_path, "dataset manifest");
            rep.input("manifest", data_path);
            DatasetManifest m = load_manifest(data_path);
            DiffusionSchedule sched = schedule_from(cfg);
            CondDenoiser model = load_score_model(score_ckpt, sched);
            rep.input("score", score_ckpt);

            std::map<int, LearnablePinv> pinv_store;
            std::map<int, const LearnablePinv*> pinvs;
            for (const auto& kv : pinv_list) {
                const auto eq = kv.find('=');
                if (eq == std::string::npos)
                    throw UsageError("--pinv expects theta=path, got: " + kv);
                const int theta = std::stoi(kv.substr(0, eq));
                const std::string path = kv.substr(eq + 1);
                require_file(path, "pseudo-inverse checkpoint for theta_miss=" +
                                       std::to_string(theta));
                rep.input("pinv_" + std::to_string(theta), path);
                pinv_store.emplace(theta, LearnablePinv::load(path));
            }
            for (const auto& [theta, mod] : pinv_store) pinvs[theta] = &mod;

            const auto& e = cfg.at("evaluate");
            ExperimentConfig ec;
            ec.theta_miss = e.at("theta_miss").get<std::vector<int>>();
            ec.angle_step_deg = m.angle_step_deg;
            ec.lambda_tv = e.at("lambda_tv").get<double>();
            ec.tv_iters = e.at("tv_iters").get<int>();
            ec.sampler_runs = e.at("sampler_runs").get<int>();
            ec.sampler = sampler_from(cfg, seed);
            ec.sa_count = ec.sampler.sa_count;
            ec.seed = seed.value_or(ec.sampler.seed);
            std::vector<Tensor> test = load_split_images(m, "test");
            const int max_images = e.at("max_images").get<int>();
            if (max_images > 0 && static_cast<int>(test.size()) > max_images)
                test.resize(static_cast<std::size_t>(max_images));

            MetricReport mr = run_experiment(test, model, pinvs, sched, ec);
            json table;
            for (const auto& [method, per_theta] : mr.aggregate)
                for (const auto& [theta, s] : per_theta)
                    table[method][std::to_string(theta)] = scores_json(s);
            rep.j["aggregate"] = table;
            json per_image = json::array();
            for (const auto& p : mr.per_image)
                per_image.push_back({{"method", p.method},
                                     {"theta_miss", p.theta_miss},
                                     {"image", p.image_index},
                                     {"scores", scores_json(p.scores)}});
            rep.j["per_image"] = per_image;
            rep.write(out);
        } else if (*ablate_cmd) {
            RunReport rep("ablate", cfg, seed);
            require_file(data_path, "dataset manifest");
            rep.input("manifest", data_path);
            DatasetManifest m = load_manifest(data_path);
            if (sweep.rfind("T=", 0) != 0)
                throw UsageError("--sweep must look like T=50,100,200");

            std::optional<LearnablePinv> pinv;
            if (!pinv_ckpt.empty()) {
                require_file(pinv_ckpt, "pseudo-inverse checkpoint");
                pinv = LearnablePinv::load(pinv_ckpt);
                rep.input("pinv", pinv_ckpt);
            }

            std::vector<Tensor> imgs = load_split_images(m, "train");
            std::vector<Tensor> mus = load_split_fbp(m, "train");
            std::vector<PairedSample> train_ds;
            for (std::size_t i = 0; i < imgs.size(); ++i) train_ds.push_back({imgs[i], mus[i]});
            std::vector<Tensor> test = load_split_images(m, "test");
            std::vector<Tensor> test_mu = load_split_fbp(m, "test");
            const int max_images = cfg.at("evaluate").at("max_images").get<int>();
            const std::size_t n_eval =
                max_images > 0 ? std::min<std::size_t>(test.size(), max_images) : test.size();
            Geometry geom = make_geometry(m.num_detectors, m.theta_miss_deg, m.angle_step_deg);

            const double lambda2 = cfg.at("schedule").at("lambda2").get<double>();
            json rows = json::array();
            for (const std::string& tv : split_csl(sweep.substr(2))) {
                const int T = std::stoi(tv);
                if (T < 2) throw UsageError("ablate: T must be >= 2");
                DiffusionSchedule sched = make_schedule(T, lambda2);
                const auto& s = cfg.at("score");
                DenoiserConfig dc;
                dc.width = s.at("width").get<int>();
                dc.blocks = s.at("blocks").get<int>();
                dc.emb_dim = s.at("emb_dim").get<int>();
                dc.dropout = s.at("dropout").get<float>();
                TrainScoreConfig tc;
                tc.steps = s.at("steps").get<int>();
                tc.batch = s.at("batch").get<int>();
                tc.lr = s.at("lr").get<double>();
                tc.seed = seed.value_or(0);
                Rng init(tc.seed);
                CondDenoiser model(dc, sched, init);
                train_score(train_ds, sched, model, tc);

                MethodScores agg{};
                SamplerConfig sc = sampler_from(cfg, seed);
                for (std::size_t i = 0; i < n_eval; ++i) {
                    Sinogram y = radon(test[i], geom);
                    sc.seed += 1;
                    SampleResult r =
                        sample(y, test_mu[i], model, pinv ? &*pinv : nullptr, sched, sc);
                    agg.psnr += psnr(r.image, test[i]) / static_cast<double>(n_eval);
                    agg.ssim += ssim(r.image, test[i]) / static_cast<double>(n_eval);
                    agg.consistency +=
                        consistency_error(r.image, y) / static_cast<double>(n_eval);
                }
                rows.push_back({{"T", T}, {"scores", scores_json(agg)}});
            }
            rep.j["rows"] = rows;
            rep.write(out);
        }
        return 0;
    } catch (const UsageError& e) {
        std::cerr << json{{"error", "usage"}, {"message", e.what()}}.dump() << "\n";
        return 2;
    } catch (const DependencyError& e) {
        std::cerr << json{{"error", "dependency"}, {"message", e.what()}}.dump() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << json{{"error", "usage"}, {"message", e.what()}}.dump() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", "numerical"}, {"message", e.what()}}.dump() << "\n";
        return 4;
    }
}
