#include "riverflow/nn/gradcheck.hpp"

#include "riverflow/common/error.hpp"

#include <cmath>
#include <random>

namespace riverflow::nn {

GradCheckResult check_gradients(const std::function<double()>& loss, const std::function<void()>& compute_grads,
                                const std::vector<Param*>& params, std::size_t probes, std::uint64_t seed,
                                double step, double floor)
{
    std::size_t total = 0;
    for (Param* p : params) total += p->value.size();
    require(total > 0, "gradient check needs at least one parameter");
    compute_grads();

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, total - 1);
    GradCheckResult out;
    for (std::size_t t = 0; t < probes; ++t) {
        std::size_t flat = pick(rng);
        Param* p = nullptr;
        for (Param* q : params) {
            if (flat < q->value.size()) {
                p = q;
                break;
            }
            flat -= q->value.size();
        }
        const double analytic = p->grad[flat];
        const double saved = p->value[flat];
        p->value[flat] = saved + step;
        const double up = loss();
        p->value[flat] = saved - step;
        const double down = loss();
        p->value[flat] = saved;
        const double numeric = (up - down) / (2.0 * step);
        const double rel = std::abs(analytic - numeric) / std::max(std::abs(analytic) + std::abs(numeric), floor);
        ++out.probes;
        if (rel >= out.max_rel_error) {
            out.max_rel_error = rel;
            out.worst = p->name + "[" + std::to_string(flat) + "]";
        }
    }
    return out;
}

} // namespace riverflow::nn
