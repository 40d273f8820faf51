/**
 * @file engine.hpp
 * @brief The four-block cycle engine: dispatch, state transition, advice
 *
 * Blocks form the machine B1 -> B2 -> B3 -> B4 -> {Done, LPS}, LPS -> B3,
 * with Cancelled reachable from any live block when the MD-talk limit is
 * configured to cancel. A decision is applied by apply_decision(), which is
 * the only place the state changes; advise() evaluates the active block and
 * then applies its own decision through the same function, so replaying a
 * doctor's decision follows exactly the path the engine's decision would.
 */

#pragma once

#include "ivf/core/types.hpp"
#include "ivf/rules/config.hpp"
#include "ivf/rules/evaluators.hpp"

#include <optional>
#include <string>

namespace ivf::rules {

/// Decision kinds each block's evaluator may emit.
[[nodiscard]] bool permitted(cycle_block block, decision_type type) noexcept;

/// Block after applying `type` in `block` (ignoring MD-talk cancellation).
[[nodiscard]] cycle_block successor_block(cycle_block block, decision_type type) noexcept;

/// Position of a block on the forward path; LPS sorts after B4.
[[nodiscard]] int block_rank(cycle_block block) noexcept;

/// True for the machine's edges, including self-loops.
[[nodiscard]] bool is_allowed_edge(cycle_block from, cycle_block to) noexcept;

/**
 * @brief Throws if `visit` cannot be applied to `state`: block-mismatch for a
 * terminal state, wrong-cycle for another patient/cycle, stale-visit for a
 * date not after the last visit, invalid-visit for other violations.
 */
void check_visit(const cycle_state& state, const visit_record& visit);

/// Runs the active block's evaluator (no precondition checks).
[[nodiscard]] evaluation evaluate(const cycle_state& state, const visit_record& visit,
                                  const rules_config& cfg);

struct transition_result {
    cycle_state next;
    prescription orders;
};

/**
 * @brief Applies `verdict` to the state for this visit.
 *
 * Missing payloads are filled by the engine's own planners (scheme selection,
 * trigger plan). `orders_override` replaces the computed prescription, e.g.
 * with a doctor's recorded prescription. Throws block-mismatch when the
 * decision is not permitted in the current block.
 */
[[nodiscard]] transition_result apply_decision(
    const cycle_state& state, const visit_record& visit, const decision& verdict,
    const rules_config& cfg, const std::optional<prescription>& orders_override = std::nullopt);

/// Days until the next visit after `type` moved `before` to `after`; none once the cycle ends.
[[nodiscard]] std::optional<int> next_visit_in_days(const cycle_state& before,
                                                    const visit_record& visit, decision_type type,
                                                    const cycle_state& after,
                                                    const rules_config& cfg);

struct step_result {
    advice output;
    cycle_state next;
};

class engine {
public:
    explicit engine(rules_config cfg = {});

    /// Evaluates the visit and applies the resulting decision. Deterministic.
    [[nodiscard]] step_result advise(const cycle_state& state, const visit_record& visit) const;

    /// Applies an externally made decision (e.g. the doctor's) after the same checks as advise().
    [[nodiscard]] transition_result apply(
        const cycle_state& state, const visit_record& visit, const decision& verdict,
        const std::optional<prescription>& orders_override = std::nullopt) const;

    [[nodiscard]] const rules_config& config() const noexcept { return cfg_; }
    [[nodiscard]] const std::string& config_hash() const noexcept { return hash_; }

private:
    rules_config cfg_;
    std::string hash_;
};

}  // namespace ivf::rules
