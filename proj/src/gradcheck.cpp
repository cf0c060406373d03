#include "attseq/gradcheck.hpp"

namespace attseq {

GradCheckCase random_gradcheck_case(std::uint64_t seed, std::size_t trial) {
  Rng rng = Rng(seed).child("gradcheck", trial);
  GradCheckCase c;
  c.model.m = 1 + rng.below(3);
  c.model.n_m = 1 + rng.below(6);
  c.model.n_l = 1 + rng.below(6);
  c.model.n = 1 + rng.below(6);
  switch (trial % 5) {
    case 3: c.model.branch_mode = BranchMode::AttributesOnly; break;
    case 4: c.model.branch_mode = BranchMode::SequenceOnly; break;
    default: c.model.branch_mode = BranchMode::Both; break;
  }
  c.meta.u = 1 + rng.below(5);
  c.meta.r = 1 + rng.below(6);
  c.meta.t_max = 1 + rng.below(6);
  c.ell = static_cast<int>(trial % 2);
  c.kind = (trial / 2) % 2 == 0 ? DistanceKind::Euclidean : DistanceKind::Manhattan;

  Rng init_rng = rng.child("init");
  c.params = init_params(c.model, c.meta, init_rng);
  // Non-zero biases so their gradients are exercised away from the init point.
  for (auto& t : tensors(c.params)) {
    if (!t.is_bias) continue;
    for (double& x : t.data) x = rng.uniform(-0.5, 0.5);
  }

  auto draw = [&] {
    AttributedSequence rec;
    for (std::size_t k = 0; k < c.meta.u; ++k) rec.attributes.push_back(rng.normal());
    const std::size_t len = 1 + rng.below(c.meta.t_max);
    for (std::size_t t = 0; t < len; ++t) rec.items.push_back(static_cast<ItemId>(rng.below(c.meta.r)));
    return encode(rec, c.meta);
  };
  c.a = draw();
  c.b = draw();
  return c;
}

GradCheckResult run_gradcheck(std::size_t trials, std::uint64_t seed, GradMode mode, double step) {
  GradCheckResult result;
  result.trials = trials;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    const GradCheckCase c = random_gradcheck_case(seed, trial);
    const auto ti = omega_forward(c.params, c.model, c.a);
    const auto tj = omega_forward(c.params, c.model, c.b);
    const PairGradient analytic =
        backward_pair(c.params, c.model, ti, tj, c.ell, c.margin, c.kind, mode);
    const Gradients numeric =
        finite_diff_grads(c.params, c.model, c.a, c.b, c.ell, c.margin, c.kind, step);

    const auto ga = tensors(analytic.grads);
    const auto gn = tensors(numeric);
    for (std::size_t t = 0; t < ga.size(); ++t) {
      for (std::size_t i = 0; i < ga[t].data.size(); ++i) {
        ++result.coordinates;
        const double err = relative_error(ga[t].data[i], gn[t].data[i]);
        if (err > result.max_rel_err || result.worst_tensor.empty()) {
          result.max_rel_err = std::max(result.max_rel_err, err);
          result.worst_trial = trial;
          result.worst_tensor = ga[t].name;
          result.worst_index = i;
          result.worst_analytic = ga[t].data[i];
          result.worst_numeric = gn[t].data[i];
        }
      }
    }
  }
  return result;
}

}  // namespace attseq
