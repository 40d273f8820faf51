/**
 * @file citation.hpp
 * @brief Internal helpers for building rule traces
 */

#pragma once

#include "ivf/core/types.hpp"

#include <string>
#include <utility>
#include <vector>

namespace ivf::rules::detail {

inline rule_citation cite(std::string id, double observed, std::string comparator,
                          double threshold, bool satisfied, std::string note = {}) {
    return rule_citation{std::move(id), observed, std::move(comparator), threshold,
                         satisfied,     false,    std::move(note)};
}

inline void mark_decisive(std::vector<rule_citation>& trace, const std::string& id) {
    for (auto& c : trace) {
        if (c.rule_id == id) c.decisive = true;
    }
}

inline alert md_talk_alert(std::string reason, std::string rule_id) {
    return alert{alert_kind::md_talk, std::move(reason), std::move(rule_id)};
}

}  // namespace ivf::rules::detail
