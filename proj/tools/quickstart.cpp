// SPDX-License-Identifier: Apache-2.0
// Library walk-through: one target, both solvers, exact twin.
#include <rpems/rpems.hpp>

#include <cstdio>

using namespace rpems;

int main()
{
    auto spec = square_scenario(20, 7);
    const auto g = calibrated_descriptor(spec.frequency_f0);
    const OracleTwin twin(spec.incident);
    const auto alphabet = derive_alphabet({twin.response(g, 0), twin.response(g, 1)}, spec.incident, spec.cell_dx,
                                          spec.cell_dy);
    const CellCurrentModel cells(twin, g, spec, alphabet.iota);
    const auto op = assemble_operator(spec);
    const auto desired = spec.footprints[0].desired_power(reference_power(cells, op));
    const auto rotation = illumination_phase(spec);

    for (bool quantized : {true, false}) {
        const auto ref = quantized ? run_qipm(op, desired, spec.obs.area_element(), alphabet, spec.qipm, rotation)
                                   : run_ipm(op, desired, spec.obs.area_element(), alphabet, spec.qipm, rotation);
        const auto conf = configure(ref.current, cells, spec.ga);
        const Eigen::VectorXcd y = op.apply(cells.current(conf.states));
        std::vector<double> p(static_cast<std::size_t>(y.size()));
        for (std::size_t s = 0; s < p.size(); ++s) p[s] = std::norm(y[static_cast<Eigen::Index>(s)]);
        const auto cov = coverage_index(p, spec.footprints[0]);
        std::printf("%-4s  iterations %3zu  psi %.2e  gamma %.4f\n", quantized ? "qipm" : "ipm",
                    ref.trace.records.size(), conf.psi, cov.gamma);
    }
}
