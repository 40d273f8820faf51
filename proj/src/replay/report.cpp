/**
 * @file report.cpp
 * @brief Scoring counters and their JSON, CSV and table renderings
 */

#include "ivf/replay/replay.hpp"

#include <cstdio>
#include <sstream>

namespace ivf::replay {

namespace {

/// True when `type` moves a live cycle on to its next block.
bool advances(cycle_block block, decision_type type) {
    const auto next = rules::successor_block(block, type);
    return next != block && next != cycle_block::done && next != cycle_block::cancelled;
}

void score(score_row& row, bool match) {
    (match ? row.correct : row.wrong) += 1;
}

std::string percent(std::optional<double> v) {
    if (!v) return "-";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f%%", *v * 100.0);
    return buf;
}

std::string fixed(double v, int digits) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

json row_json(const score_row& r, bool with_direction) {
    json j{{"correct", r.correct}, {"wrong", r.wrong}, {"total", r.total()}};
    if (const auto a = r.accuracy()) j["accuracy"] = *a;
    if (with_direction) {
        j["early"] = r.early;
        j["late"] = r.late;
    }
    return j;
}

}  // namespace

std::optional<std::size_t> intra_row(cycle_block block) noexcept {
    switch (block) {
        case cycle_block::b1: return 0;
        case cycle_block::b2:
        case cycle_block::lps: return 1;
        case cycle_block::b3: return 2;
        case cycle_block::b4: return 3;
        default: return std::nullopt;
    }
}

void replay_report::add(const replay_outcome& outcome) {
    ++cycles;
    if (!outcome.aborted.empty()) ++aborted_cycles;

    for (const auto& v : outcome.visits) {
        const auto row = intra_row(v.block);
        if (!row) continue;
        const bool truth_moves = advances(v.block, v.truth);
        const bool pred_moves = advances(v.block, v.predicted);
        if (v.block == cycle_block::b3 || !truth_moves) score(intra[*row], v.match);
        if (truth_moves || pred_moves) {
            auto& t = transitions[*row];
            score(t, v.match);
            if (pred_moves && !truth_moves) ++t.early;
            if (truth_moves && !pred_moves) ++t.late;
        }
    }

    // Trigger timing per stimulation round (a maximal run of B2 or of LPS visits).
    std::size_t i = 0;
    const auto& vs = outcome.visits;
    while (i < vs.size()) {
        const cycle_block b = vs[i].block;
        if (b != cycle_block::b2 && b != cycle_block::lps) {
            ++i;
            continue;
        }
        std::optional<calendar_date> first_predicted;
        std::optional<calendar_date> doctor;
        for (; i < vs.size() && vs[i].block == b; ++i) {
            if (!first_predicted && vs[i].predicted == decision_type::trigger) {
                first_predicted = vs[i].date;
            }
            if (vs[i].truth == decision_type::trigger) {
                doctor = vs[i].date;
                ++i;
                break;
            }
        }
        if (!doctor) continue;
        if (!first_predicted) {
            ++late_triggers;
        } else if (*first_predicted < *doctor) {
            ++early_triggers[days_between(*first_predicted, *doctor)];
        }
    }

    auto& m = md_talk[outcome.md_talk_count];
    ++m.cycles;
    if (outcome.retrieved_oocytes) {
        ++m.retrieved_cycles;
        m.oocyte_sum += *outcome.retrieved_oocytes;
        m.max_oocytes = std::max(m.max_oocytes, *outcome.retrieved_oocytes);
    }
    if (outcome.cancelled) ++m.cancelled;
}

void replay_report::merge(const replay_report& o) {
    if (config_hash.empty()) config_hash = o.config_hash;
    cycles += o.cycles;
    aborted_cycles += o.aborted_cycles;
    for (std::size_t i = 0; i < 4; ++i) {
        intra[i].merge(o.intra[i]);
        transitions[i].merge(o.transitions[i]);
    }
    for (const auto& [days, n] : o.early_triggers) early_triggers[days] += n;
    late_triggers += o.late_triggers;
    for (const auto& [k, row] : o.md_talk) {
        auto& m = md_talk[k];
        m.cycles += row.cycles;
        m.retrieved_cycles += row.retrieved_cycles;
        m.oocyte_sum += row.oocyte_sum;
        m.max_oocytes = std::max(m.max_oocytes, row.max_oocytes);
        m.cancelled += row.cancelled;
    }
}

replay_report aggregate(const std::vector<replay_outcome>& outcomes,
                        const std::string& config_hash) {
    replay_report r;
    r.config_hash = config_hash;
    for (const auto& o : outcomes) r.add(o);
    return r;
}

void to_json(json& j, const replay_report& r) {
    json intra = json::object();
    json trans = json::object();
    for (std::size_t i = 0; i < 4; ++i) {
        intra[intra_labels[i]] = row_json(r.intra[i], false);
        trans[transition_labels[i]] = row_json(r.transitions[i], true);
    }
    json early = json::object();
    for (const auto& [days, n] : r.early_triggers) early[std::to_string(days)] = n;
    json md = json::array();
    for (const auto& [k, m] : r.md_talk) {
        json row{{"md_talk_count", k},
                 {"cycles", m.cycles},
                 {"retrieved_cycles", m.retrieved_cycles},
                 {"max_oocytes", m.max_oocytes},
                 {"cancelled", m.cancelled},
                 {"cancellation_rate", m.cancellation_rate()}};
        if (const auto mean = m.mean_oocytes()) row["mean_oocytes"] = *mean;
        md.push_back(std::move(row));
    }
    j = json{{"config_hash", r.config_hash},
             {"cycles", r.cycles},
             {"aborted_cycles", r.aborted_cycles},
             {"intra_block", std::move(intra)},
             {"transitions", std::move(trans)},
             {"early_trigger_histogram", std::move(early)},
             {"late_triggers", r.late_triggers},
             {"md_talk_vs_oocytes", std::move(md)}};
}

std::optional<report_format> report_format_from_string(std::string_view s) {
    if (s == "json") return report_format::json;
    if (s == "csv") return report_format::csv;
    if (s == "table") return report_format::table;
    return std::nullopt;
}

std::string render(const replay_report& r, report_format format) {
    std::ostringstream out;
    switch (format) {
        case report_format::json:
            out << json(r).dump(2) << '\n';
            break;

        case report_format::csv: {
            out << "section,key,wrong,correct,total,accuracy,early,late\n";
            auto acc = [](const score_row& row) {
                const auto a = row.accuracy();
                return a ? fixed(*a, 6) : std::string{};
            };
            for (std::size_t i = 0; i < 4; ++i) {
                const auto& row = r.intra[i];
                out << "intra_block," << intra_labels[i] << ',' << row.wrong << ',' << row.correct
                    << ',' << row.total() << ',' << acc(row) << ",,\n";
            }
            for (std::size_t i = 0; i < 4; ++i) {
                const auto& row = r.transitions[i];
                out << "transition," << transition_labels[i] << ',' << row.wrong << ','
                    << row.correct << ',' << row.total() << ',' << acc(row) << ',' << row.early
                    << ',' << row.late << '\n';
            }
            for (const auto& [days, n] : r.early_triggers) {
                out << "early_trigger," << days << ",,," << n << ",,,\n";
            }
            out << "late_trigger,,,," << r.late_triggers << ",,,\n";
            out << "\nmd_talk_count,cycles,retrieved_cycles,max_oocytes,mean_oocytes,"
                   "cancellation_rate\n";
            for (const auto& [k, m] : r.md_talk) {
                const auto mean = m.mean_oocytes();
                out << k << ',' << m.cycles << ',' << m.retrieved_cycles << ',' << m.max_oocytes
                    << ',' << (mean ? fixed(*mean, 4) : std::string{}) << ','
                    << fixed(m.cancellation_rate(), 4) << '\n';
            }
            break;
        }

        case report_format::table: {
            char line[160];
            auto table = [&](const char* title, const char* corner,
                             const std::array<const char*, 4>& labels,
                             const std::array<score_row, 4>& rows) {
                out << title << '\n';
                std::snprintf(line, sizeof line, "%-10s|%10s%10s%10s%10s\n", corner, labels[0],
                              labels[1], labels[2], labels[3]);
                out << line << std::string(50, '-') << '\n';
                auto numbers = [&](const char* name, auto get) {
                    std::snprintf(line, sizeof line, "%-10s|%10d%10d%10d%10d\n", name,
                                  get(rows[0]), get(rows[1]), get(rows[2]), get(rows[3]));
                    out << line;
                };
                numbers("Wrong", [](const score_row& s) { return s.wrong; });
                numbers("Correct", [](const score_row& s) { return s.correct; });
                numbers("Total", [](const score_row& s) { return s.total(); });
                out << std::string(50, '-') << '\n';
                std::snprintf(line, sizeof line, "%-10s|%10s%10s%10s%10s\n", "Accuracy",
                              percent(rows[0].accuracy()).c_str(),
                              percent(rows[1].accuracy()).c_str(),
                              percent(rows[2].accuracy()).c_str(),
                              percent(rows[3].accuracy()).c_str());
                out << line << '\n';
            };
            table("Accuracy of Intra-block decisions", "", intra_labels, r.intra);
            table("Accuracy of Block transitions", "transition", transition_labels,
                  r.transitions);
            out << "Early triggers (days early: rounds)";
            for (const auto& [days, n] : r.early_triggers) out << "  " << days << ": " << n;
            out << "\nLate triggers: " << r.late_triggers << '\n';
            out << "\nMD talks | cycles | max oocytes | mean oocytes | cancellation rate\n";
            for (const auto& [k, m] : r.md_talk) {
                const auto mean = m.mean_oocytes();
                std::snprintf(line, sizeof line, "%8d | %6d | %11d | %12s | %17s\n", k, m.cycles,
                              m.max_oocytes, mean ? fixed(*mean, 2).c_str() : "-",
                              percent(m.cancellation_rate()).c_str());
                out << line;
            }
            break;
        }
    }
    return out.str();
}

}  // namespace ivf::replay
