#include <CLI11.hpp>

#include <exception>
#include <iostream>

#include "commands.hpp"
#include "radscan/tensor.hpp"

using namespace radscan::cli;

int main(int argc, char** argv) {
    CLI::App app{"Radial-scan flare removal toolkit"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOptions g;
    app.add_option("--config", g.config, "key=value training config file");
    app.add_option("--seed", g.seed, "random seed (overrides the config)");
    app.add_option("--out", g.out, "output directory")->capture_default_str();

    SynthOptions so;
    auto* synth = app.add_subcommand("synth", "generate a synthetic flare dataset");
    synth->add_option("--n", so.n, "number of samples")->capture_default_str();
    synth->add_option("--height", so.height)->capture_default_str();
    synth->add_option("--width", so.width)->capture_default_str();
    synth->add_option("--min-sources", so.min_sources)->capture_default_str();
    synth->add_option("--max-sources", so.max_sources)->capture_default_str();

    GradcheckOptions go;
    auto* grad = app.add_subcommand("gradcheck", "check every analytic gradient against finite differences");
    grad->add_flag("--inject-fault", go.inject_fault)->group("");

    TrainOptions to;
    auto* train = app.add_subcommand("train", "train the prior network or the restoration network");
    train->add_option("--stage", to.stage, "fpn or main")->required()->check(CLI::IsMember({"fpn", "main"}));
    train->add_option("--dataset", to.dataset, "dataset directory (overrides the config)");
    train->add_option("--fpn", to.fpn, "trained FPN checkpoint (stage main)");
    train->add_option("--resume", to.resume, "checkpoint to resume from");
    train->add_option("--iterations", to.iterations, "total iterations (overrides the config)");
    train->add_option("--stop-at", to.stop_at, "checkpoint and stop before this iteration");
    train->add_option("--lr", to.lr, "base learning rate (overrides the config)");

    EvalOptions eo;
    auto* eval = app.add_subcommand("eval", "score restorations and write restored images");
    eval->add_option("--dataset", eo.dataset, "dataset directory");
    eval->add_option("--fpn", eo.fpn, "FPN checkpoint");
    eval->add_option("--main", eo.main, "restoration checkpoint");
    eval->add_flag("--identity", eo.identity, "score the unprocessed input as the restoration");

    EvalOptions ao;
    ao.write_images = false;
    auto* ablate = app.add_subcommand("ablate", "compare full priors against each starved mechanism");
    ablate->add_option("--dataset", ao.dataset, "dataset directory");
    ablate->add_option("--fpn", ao.fpn, "FPN checkpoint")->required();
    ablate->add_option("--main", ao.main, "restoration checkpoint")->required();

    BenchOptions bo;
    auto* bench = app.add_subcommand("bench", "kernel and scan throughput");
    bench->add_option("--lengths", bo.lengths, "sequence lengths")->delimiter(',')->capture_default_str();
    bench->add_option("--chunk", bo.chunk)->capture_default_str();
    bench->add_option("--repeats", bo.repeats)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kValidation;
    }

    try {
        if (*synth) return cmd_synth(g, so);
        if (*grad) return cmd_gradcheck(g, go);
        if (*train) return cmd_train(g, to);
        if (*eval) return cmd_eval(g, eo);
        if (*ablate) return cmd_ablate(g, ao);
        if (*bench) return cmd_bench(g, bo);
    } catch (const VerificationFailure& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kVerification;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kValidation;
    }
    return kValidation;
}
