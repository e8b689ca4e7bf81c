#include "ssr/cli.hpp"

#include "CLI11.hpp"

#include <iostream>

int main(int argc, char** argv)
{
    CLI::App app{"Selective Sinkhorn routing toolkit"};
    app.require_subcommand(1);

    std::string filter;
    auto* verify = app.add_subcommand("verify", "run the invariant and oracle suite");
    verify->add_option("--filter", filter, "run only checks whose name contains PAT");

    std::string train_config;
    auto* train = app.add_subcommand("train", "train one block per named router");
    train->add_option("--config", train_config, "experiment config (JSON)")->required();

    std::string bench_config;
    auto* bench = app.add_subcommand("bench", "time router overhead against softmax routing");
    bench->add_option("--config", bench_config, "experiment config (JSON)")->required();

    ssr::RouteArgs route_args;
    auto* route = app.add_subcommand("route", "route a score matrix read from CSV");
    route->add_option("--scores", route_args.scores_path, "score matrix, one token per line")->required();
    route->add_option("--k", route_args.k);
    route->add_option("--p", route_args.p);
    route->add_option("--xi", route_args.xi);
    route->add_option("--delta", route_args.delta);
    route->add_option("--eta", route_args.eta);
    route->add_option("--cost", route_args.cost, "linear|softmax");
    route->add_option("--alpha-noise", route_args.alpha_noise);
    route->add_option("--sigma", route_args.sigma);
    route->add_option("--mode", route_args.mode, "train|inference");
    route->add_option("--force-branch", route_args.force_branch, "softmax|sinkhorn|noise|both");
    route->add_flag("--plan", route_args.plan, "also print the transport plan and diagnostics");
    route->add_flag("--naive", route_args.naive, "use the unstabilized solver");
    route->add_option("--seed", route_args.seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        app.exit(e);
        return ssr::kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
        app.exit(e);
        return ssr::kExitOk;
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return ssr::kExitInputError;
    }

    try {
        if (*verify) return ssr::cmd_verify(filter, {}, std::cout, std::cerr);
        if (*train) return ssr::cmd_train(train_config, std::cout, std::cerr);
        if (*bench) return ssr::cmd_bench(bench_config, std::cout, std::cerr);
        if (*route) return ssr::cmd_route(route_args, std::cout, std::cerr);
    } catch (const std::invalid_argument& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return ssr::kExitInputError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return ssr::kExitNumericFailure;
    }
    return ssr::kExitInputError;
}
