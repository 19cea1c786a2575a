#include "gtdl/generate.hpp"

#include "gtdl/graphs.hpp"
#include "gtdl/rng.hpp"
#include "gtdl/synth_mvn.hpp"
#include "gtdl/synth_scm.hpp"

namespace gtdl {

GeneratorType parse_generator(const std::string& name) {
    if (name == "mvn") return GeneratorType::Mvn;
    if (name == "scm") return GeneratorType::Scm;
    throw UsageError("unknown generator type '" + name + "' (expected mvn or scm)");
}

std::string to_string(GeneratorType type) { return type == GeneratorType::Mvn ? "mvn" : "scm"; }

DatasetSpec DatasetSpec::mvn_defaults(std::uint64_t seed) {
    DatasetSpec spec;
    spec.type = GeneratorType::Mvn;
    spec.seed = seed;
    spec.p_edge = 0.267;
    return spec;
}

DatasetSpec DatasetSpec::scm_defaults(std::uint64_t seed) {
    DatasetSpec spec;
    spec.type = GeneratorType::Scm;
    spec.seed = seed;
    spec.p_edge = 0.5;
    return spec;
}

Dataset make_dataset(const DatasetSpec& spec) {
    SeededRng rng(spec.seed);
    Dataset ds;
    if (spec.type == GeneratorType::Mvn) {
        const auto graph = sample_er_graph(spec.p, spec.p_edge, rng);
        const auto precision =
            sample_precision(graph, rng, {spec.min_weight, spec.max_weight, spec.delta});
        ds = sample_mvn(precision, spec.n, rng);
        ds.meta.params = {{"p_edge", spec.p_edge},
                          {"min_weight", spec.min_weight},
                          {"max_weight", spec.max_weight},
                          {"delta", spec.delta}};
    } else {
        auto dag = sample_layered_dag({spec.p, spec.n_root, spec.n_layers, spec.p_edge}, rng);
        auto maps = assign_maps(dag, rng);
        const ScmOptions options{spec.noise_sd, spec.clip};
        try {
            ds = generate_scm(dag, maps, spec.n, rng, options);
        } catch (const DegenerateColumn&) {
            maps = assign_maps(dag, rng);
            ds = generate_scm(dag, maps, spec.n, rng, options);
        }
        ds.meta.params = {{"p_edge", spec.p_edge},
                          {"n_root", static_cast<double>(spec.n_root)},
                          {"n_layers", static_cast<double>(spec.n_layers)},
                          {"noise_sd", spec.noise_sd},
                          {"clip", spec.clip}};
    }
    ds.meta.generator = to_string(spec.type);
    ds.meta.seed = spec.seed;
    ds.meta.params["n"] = static_cast<double>(spec.n);
    ds.meta.params["p"] = static_cast<double>(spec.p);
    ds.validate();
    return ds;
}

}  // namespace gtdl
