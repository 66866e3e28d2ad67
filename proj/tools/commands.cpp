#include "commands.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "radscan/benchmarks.hpp"
#include "radscan/checkpoint.hpp"
#include "radscan/config.hpp"
#include "radscan/evaluation.hpp"
#include "radscan/gradient_suite.hpp"
#include "radscan/kernels.hpp"
#include "radscan/metrics.hpp"
#include "radscan/training.hpp"

namespace radscan::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";

/// Append-only run record in <out>/run.log.
class RunLog {
public:
    RunLog(const GlobalOptions& g, const std::string& command) {
        fs::create_directories(g.out);
        out_.open(fs::path(g.out) / "run.log");
        if (!out_) throw std::runtime_error("cannot write run.log in " + g.out);
        out_ << "command: " << command << '\n'
             << "version: radscan " << kVersion << '\n'
             << "compiler: " << __VERSION__ << '\n'
             << "threads: " << kernels::configure_threads_from_env() << '\n'
             << "config_file: " << (g.config.empty() ? "(none)" : g.config) << '\n'
             << "out: " << g.out << '\n';
    }

    void config(const TrainConfig& c) { out_ << "[resolved config]\n" << describe(c) << "[end config]\n"; }

    template <typename T>
    RunLog& operator<<(const T& v) {
        out_ << v;
        return *this;
    }

private:
    std::ofstream out_;
};

TrainConfig resolve_config(const GlobalOptions& g) {
    TrainConfig c = g.config.empty() ? TrainConfig{} : load_config(g.config);
    if (g.seed) c.seed = *g.seed;
    return c;
}

std::string fmt(double v, int digits = 4) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string scores_row(const SampleScores& s) {
    return fmt(s.psnr) + '\t' + fmt(s.ssim, 6) + '\t' + fmt(s.light_psnr) + '\t' + fmt(s.clean_psnr) + '\t' +
           fmt(s.glare_psnr) + '\t' + fmt(s.streak_psnr);
}

constexpr const char* kMetricColumns = "PSNR\tSSIM\tLight-PSNR\tClean-PSNR\tG-PSNR\tS-PSNR";

SampleScores mean_scores(const std::vector<SampleScores>& all) {
    auto col = [&](double SampleScores::*m) {
        std::vector<double> v;
        for (const auto& s : all) v.push_back(s.*m);
        return finite_mean(v);
    };
    return {col(&SampleScores::psnr),       col(&SampleScores::ssim),       col(&SampleScores::light_psnr),
            col(&SampleScores::clean_psnr), col(&SampleScores::glare_psnr), col(&SampleScores::streak_psnr)};
}

std::string require_path(const std::string& value, const char* what) {
    if (value.empty()) throw std::invalid_argument(std::string("missing required ") + what);
    return value;
}

Restorer load_restorer(const EvalOptions& o) {
    const Checkpoint fck = Checkpoint::load(require_path(o.fpn, "--fpn <checkpoint>"));
    const Checkpoint mck = Checkpoint::load(require_path(o.main, "--main <checkpoint>"));
    return {fpn_from_checkpoint(fck), main_from_checkpoint(mck)};
}

std::string dataset_dir(const EvalOptions& o, const TrainConfig& c) {
    return require_path(o.dataset.empty() ? c.dataset : o.dataset, "--dataset <dir>");
}

}  // namespace

int cmd_synth(const GlobalOptions& g, const SynthOptions& o) {
    if (o.n == 0) throw std::invalid_argument("synth: --n must be positive");
    SynthConfig sc;
    sc.height = o.height;
    sc.width = o.width;
    sc.min_sources = o.min_sources;
    sc.max_sources = o.max_sources;
    if (sc.min_sources == 0 || sc.min_sources > sc.max_sources)
        throw std::invalid_argument("synth: need 1 <= --min-sources <= --max-sources");
    if (sc.height % 8 || sc.width % 8) throw std::invalid_argument("synth: extents must be multiples of 8");
    const std::uint64_t seed = g.seed.value_or(resolve_config(g).seed);
    RunLog log(g, "synth");
    log << "n: " << o.n << "\nseed: " << seed << "\nsize: " << sc.height << "x" << sc.width
        << "\nsources: " << sc.min_sources << ".." << sc.max_sources << '\n';
    const std::string manifest = write_dataset(o.n, sc, seed, g.out);
    std::cout << "wrote " << o.n << " samples, manifest " << manifest << '\n';
    return kOk;
}

int cmd_gradcheck(const GlobalOptions& g, const GradcheckOptions& o) {
    RunLog log(g, "gradcheck");
    const auto reports = run_gradient_suite(o.inject_fault);
    std::size_t failed = 0;
    std::ostringstream table;
    table << "check\tmax_rel_error\ttolerance\tstatus\n";
    for (const auto& r : reports) {
        failed += !r.passed();
        char buf[160];
        std::snprintf(buf, sizeof buf, "%s\t%.3e\t%.0e\t%s\n", r.name.c_str(), r.max_rel_error, r.tolerance,
                      r.passed() ? "pass" : "FAIL");
        table << buf;
    }
    std::cout << table.str();
    log << table.str() << "failed: " << failed << '\n';
    if (failed) {
        std::cerr << "gradcheck: " << failed << " of " << reports.size() << " checks failed\n";
        return kVerification;
    }
    return kOk;
}

int cmd_train(const GlobalOptions& g, const TrainOptions& o) {
    if (o.stage != "fpn" && o.stage != "main") throw std::invalid_argument("train: --stage must be fpn or main");
    TrainConfig c = resolve_config(g);
    if (o.iterations) c.iterations = *o.iterations;
    if (o.lr) c.lr = *o.lr;
    if (!o.dataset.empty()) c.dataset = o.dataset;
    RunLog log(g, "train --stage " + o.stage);
    log.config(c);
    if (c.dataset.empty()) throw std::invalid_argument("train: no dataset (pass --dataset or set dataset= in the config)");
    std::optional<Checkpoint> fpn_ck;
    if (o.stage == "main") {
        if (o.fpn.empty())
            throw std::invalid_argument("train --stage main requires a trained FPN checkpoint: pass --fpn <path> "
                                        "(produce one with `train --stage fpn`)");
        fpn_ck = Checkpoint::load(o.fpn);
    }
    std::optional<Checkpoint> resume;
    if (!o.resume.empty()) resume = Checkpoint::load(o.resume);

    if (fpn_ck) log << "fpn_checkpoint: " << o.fpn << '\n';
    if (resume) log << "resume: " << o.resume << " at iteration " << resume->iteration << '\n';

    const std::vector<SceneSample> data = load_dataset(c.dataset);
    radscan::TrainOptions opts;
    opts.resume = resume ? &*resume : nullptr;
    if (o.stop_at) opts.stop_at = *o.stop_at;
    const TrainRun run = o.stage == "fpn" ? train_fpn(c, data, opts) : train_main(c, data, &*fpn_ck, opts);

    const fs::path ck_path = fs::path(g.out) / (o.stage + ".ckpt");
    const fs::path curve_path = fs::path(g.out) / (o.stage + "_loss.tsv");
    run.checkpoint.save(ck_path.string());
    write_loss_curve(curve_path.string(), run.rows, c.log_interval);
    log << "samples: " << data.size() << "\niterations_run: " << run.rows.size()
        << "\nfinal_iteration: " << run.checkpoint.iteration << '\n';
    if (!run.rows.empty()) {
        log << "smoothed_loss_initial: " << fmt(smoothed_loss(run.rows, false), 6)
            << "\nsmoothed_loss_final: " << fmt(smoothed_loss(run.rows, true), 6) << '\n';
        std::cout << o.stage << ": " << run.rows.size() << " iterations, smoothed loss "
                  << fmt(smoothed_loss(run.rows, false), 6) << " -> " << fmt(smoothed_loss(run.rows, true), 6) << '\n';
    }
    log << "checkpoint: " << ck_path.string() << "\nloss_curve: " << curve_path.string() << '\n';
    std::cout << "checkpoint " << ck_path.string() << '\n';
    return kOk;
}

int cmd_eval(const GlobalOptions& g, const EvalOptions& o) {
    const TrainConfig c = resolve_config(g);
    const std::string dir = dataset_dir(o, c);
    std::optional<Restorer> model;
    if (!o.identity) model = load_restorer(o);
    const std::vector<SceneSample> data = load_dataset(dir);

    RunLog log(g, o.identity ? "eval --identity" : "eval");
    log << "dataset: " << dir << '\n';
    if (model) log << "fpn: " << o.fpn << "\nmain: " << o.main << '\n';

    const fs::path img_dir = fs::path(g.out) / "restored";
    if (o.write_images) fs::create_directories(img_dir);
    std::ofstream tsv(fs::path(g.out) / "metrics.tsv");
    if (!tsv) throw std::runtime_error("cannot write metrics.tsv in " + g.out);
    tsv << "sample\t" << kMetricColumns << '\n';

    std::vector<SampleScores> all;
    std::size_t improved = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const SceneSample& s = data[i];
        const Tensor restored = model ? model->restore(s.input) : s.input;
        const SampleScores sc = score_restoration(s, restored);
        all.push_back(sc);
        tsv << i << '\t' << scores_row(sc) << '\n';
        if (o.write_images) {
            char name[32];
            std::snprintf(name, sizeof name, "%04zu.ppm", i);
            write_ppm((img_dir / name).string(), restored);
        }
        if (model) {
            const double base = psnr(s.input, s.clean_target());
            improved += sc.psnr > base;
            log << "sample " << i << ": PSNR " << fmt(sc.psnr) << " vs identity " << fmt(base) << " (gain "
                << fmt(sc.psnr - base) << " dB)\n";
        }
    }
    tsv << "mean\t" << scores_row(mean_scores(all)) << '\n';
    if (model) {
        log << "improved_over_identity: " << improved << "/" << data.size() << '\n';
        std::cout << "improved over identity on " << improved << "/" << data.size() << " samples\n";
    }
    std::cout << "sample\t" << kMetricColumns << "\nmean\t" << scores_row(mean_scores(all)) << '\n';
    return kOk;
}

int cmd_ablate(const GlobalOptions& g, const EvalOptions& o) {
    const TrainConfig c = resolve_config(g);
    const std::string dir = dataset_dir(o, c);
    const Restorer model = load_restorer(o);
    const std::vector<SceneSample> data = load_dataset(dir);
    RunLog log(g, "ablate");
    log << "dataset: " << dir << "\nfpn: " << o.fpn << "\nmain: " << o.main << '\n';

    std::ostringstream table;
    table << "config\t" << kMetricColumns << '\n';
    double full_clean = 0.0;
    bool ordered = true;
    for (Ablation a : all_ablations()) {
        std::vector<SampleScores> all;
        for (const SceneSample& s : data) all.push_back(score_restoration(s, model.restore(s.input, a)));
        const SampleScores m = mean_scores(all);
        table << ablation_name(a) << '\t' << scores_row(m) << '\n';
        if (a == Ablation::full) full_clean = m.clean_psnr;
        else ordered &= full_clean >= m.clean_psnr;
    }
    std::ofstream(fs::path(g.out) / "ablation.tsv") << table.str();
    std::cout << table.str();
    log << table.str() << "full_clean_psnr_not_below_ablations: " << (ordered ? "yes" : "no") << '\n';
    return kOk;
}

int cmd_bench(const GlobalOptions& g, const BenchOptions& o) {
    RunLog log(g, "bench");
    std::ostringstream table;
    table << "kernel\treference_ms\tparallel_ms\tidentical\n";
    for (const KernelBenchRow& r : {bench_conv_kernel(8, 64, o.repeats, 1), bench_scan_kernel(16384, 8, o.repeats, 2)}) {
        table << r.name << '\t' << fmt(r.reference_ms, 3) << '\t' << fmt(r.parallel_ms, 3) << '\t'
              << (r.identical ? "yes" : "no") << '\n';
        if (!r.identical) throw VerificationFailure("bench: parallel kernel disagrees with reference for " + r.name);
    }
    table << "\nlength\tchunk\tsequential_tokens_per_s\tchunked_tokens_per_s\tspeedup\tmax_rel_deviation\n";
    for (std::size_t L : o.lengths) {
        ScanBenchRow r;
        try {
            r = bench_scan(L, o.chunk, o.repeats, L);
        } catch (const std::runtime_error& e) {
            throw VerificationFailure(e.what());
        }
        char buf[200];
        std::snprintf(buf, sizeof buf, "%zu\t%zu\t%.4g\t%.4g\t%.2f\t%.2e\n", r.length, r.chunk,
                      r.sequential_tokens_per_s, r.chunked_tokens_per_s, r.speedup(), r.max_rel_deviation);
        table << buf;
    }
    std::cout << table.str();
    log << table.str();
    return kOk;
}

}  // namespace radscan::cli
