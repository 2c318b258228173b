// Single-layer dictionary recovery from a perturbed initialization.
//
//   shallow_recovery [seed] [snr_db]

#include <ds2p/altmin.hpp>
#include <ds2p/genmodel.hpp>

#include <cstdio>
#include <cstdlib>

int main(int argc, char** argv)
{
    using namespace ds2p;
    const std::uint64_t seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 1;
    const double snr_db = argc > 2 ? std::atof(argv[2]) : 6.0;

    const auto spec = DeepModelSpec::shallow(50, 100, 3);
    const auto inst = synthesize(spec, 1500, seed);
    Rng init_rng = Rng(seed).split(1);
    const auto init = perturb_dictionary(inst.dicts[0], alpha_from_snr_db(snr_db), init_rng);

    AltMinConfig cfg;
    cfg.max_iterations = 10;
    const auto res = altmin_dict(inst.observations, init.dictionary, cfg, spec.code_sparsity, inst.dicts[0]);

    std::printf("d=50 r=100 s=3 n=1500 seed=%llu init %.1f dB, initial err %.3g\n",
                static_cast<unsigned long long>(seed), snr_db, dict_error(init.dictionary, inst.dicts[0]));
    std::printf("%4s %12s %12s %12s\n", "iter", "eps_t", "dict_change", "err");
    for (const auto& it : res.trace.iterations) {
        std::printf("%4zu %12.4g %12.4g %12.4g\n", it.iter, it.eps, it.dict_change, it.err);
    }
    return 0;
}
