/**
 * @file config.cpp
 * @brief Rules configuration document: defaults, overrides, hashing
 */

#include "ivf/rules/config.hpp"

#include "ivf/core/error.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <iostream>
#include <sstream>

namespace ivf::rules {

const analyte_window& block2_window::for_analyte(analyte a) const {
    switch (a) {
        case analyte::fsh: return fsh;
        case analyte::lh: return lh;
        case analyte::e2: return e2;
        case analyte::p4: return p4;
    }
    return fsh;
}

namespace {

json bound_json(const std::optional<bound>& b) {
    if (!b) return nullptr;
    return json{{"value", b->value}, {"inclusive", b->inclusive}};
}

std::optional<bound> bound_from(const json& j) {
    if (j.is_null()) return std::nullopt;
    return bound{j.at("value").get<double>(), j.at("inclusive").get<bool>()};
}

json window_json(const analyte_window& w) {
    return json{{"lower", bound_json(w.lower)}, {"upper", bound_json(w.upper)}};
}

// merge_patch drops null members, so an absent side means unbounded.
analyte_window window_from(const json& j) {
    return analyte_window{bound_from(j.value("lower", json())), bound_from(j.value("upper", json()))};
}

json block2_json(const block2_window& w) {
    return json{{"fsh", window_json(w.fsh)},
                {"lh", window_json(w.lh)},
                {"e2", window_json(w.e2)},
                {"p4", window_json(w.p4)},
                {"growth_required", w.growth_required}};
}

block2_window block2_from(const json& j) {
    return block2_window{window_from(j.at("fsh")), window_from(j.at("lh")),
                         window_from(j.at("e2")), window_from(j.at("p4")),
                         j.at("growth_required").get<bool>()};
}

json band_json(const block1_band& b) {
    return json{{"fsh_max", b.fsh_max}, {"lh_max", b.lh_max}, {"e2_max", b.e2_max},
                {"p4_max", b.p4_max}};
}

block1_band band_from(const json& j) {
    return block1_band{j.at("fsh_max").get<double>(), j.at("lh_max").get<double>(),
                       j.at("e2_max").get<double>(), j.at("p4_max").get<double>()};
}

json hashed_json(const rules_config& cfg) {
    json j = cfg;
    j.erase("provenance");
    return j;
}

void require(bool ok, const std::string& what) {
    if (!ok) throw ivf_error(errc::invalid_config, "invalid rules config: " + what);
}

}  // namespace

void to_json(json& j, const rules_config& cfg) {
    const auto& b1 = cfg.block1;
    j = json{
        {"version", cfg.version},
        {"provenance", cfg.provenance},
        {"block1",
         {{"age_split", b1.age_split},
          {"younger", band_json(b1.younger)},
          {"older", band_json(b1.older)},
          {"count_base", b1.count_base},
          {"older_count_min", b1.older_count_min},
          {"older_count_max", b1.older_count_max},
          {"max_follicle_size_mm", b1.max_follicle_size_mm}}},
        {"block2",
         {{"medicated", block2_json(cfg.block2.medicated)},
          {"natural", block2_json(cfg.block2.natural)}}},
        {"maturity", json::array()},
        {"growth",
         {{"lead_cohort", cfg.growth.lead_cohort},
          {"growing_mm_per_day", cfg.growth.growing_mm_per_day},
          {"shrinking_mm_per_day", cfg.growth.shrinking_mm_per_day}}},
        {"dosing",
         {{"mini_initial_iu", cfg.dosing.mini_initial_iu},
          {"ultra_mini_initial_iu", cfg.dosing.ultra_mini_initial_iu},
          {"clomid_mg", cfg.dosing.clomid_mg},
          {"letrozole_mg", cfg.dosing.letrozole_mg},
          {"step_iu", cfg.dosing.step_iu},
          {"min_iu", cfg.dosing.min_iu},
          {"max_iu", cfg.dosing.max_iu},
          {"e2_high", cfg.dosing.e2_high}}},
        {"escalation",
         {{"slow_streak_limit", cfg.escalation.slow_streak_limit},
          {"preparation_md_talk_after", cfg.escalation.preparation_md_talk_after},
          {"md_talk_cancel_limit", cfg.escalation.md_talk_cancel_limit},
          {"cancel_on_md_talk_limit", cfg.escalation.cancel_on_md_talk_limit}}},
        {"intervals",
         {{"stimulation_pattern", cfg.intervals.stimulation_pattern},
          {"preparation_default_days", cfg.intervals.preparation_default_days},
          {"preparation_min_days", cfg.intervals.preparation_min_days},
          {"preparation_max_days", cfg.intervals.preparation_max_days},
          {"near_threshold_fraction", cfg.intervals.near_threshold_fraction}}},
        {"trigger",
         {{"e2_split", cfg.trigger.e2_split},
          {"big_follicle_min_mm", cfg.trigger.big_follicle_min_mm},
          {"big_follicle_count", cfg.trigger.big_follicle_count},
          {"lh_no_trigger", cfg.trigger.lh_no_trigger},
          {"lh_surge_ratio", cfg.trigger.lh_surge_ratio},
          {"no_trigger_hours", cfg.trigger.no_trigger_hours},
          {"surge_hours", cfg.trigger.surge_hours},
          {"default_hours_younger", cfg.trigger.default_hours_younger},
          {"default_hours_older", cfg.trigger.default_hours_older},
          {"age_split", cfg.trigger.age_split},
          {"trigger_hour", cfg.trigger.trigger_hour}}},
        {"post_trigger",
         {{"ovulation_window_hours", cfg.post_trigger.ovulation_window_hours},
          {"lps_min_age", cfg.post_trigger.lps_min_age},
          {"lps_small_size_mm", cfg.post_trigger.lps_small_size_mm},
          {"lps_small_count_exclusive", cfg.post_trigger.lps_small_count_exclusive}}},
    };
    for (const auto& m : cfg.maturity) {
        j["maturity"].push_back(json{{"size_mm", m.size_mm}, {"percent", m.percent}});
    }
}

rules_config rules_config_from_json(const json& doc) {
    if (!doc.is_object()) throw ivf_error(errc::invalid_config, "rules config must be an object");
    const rules_config defaults;
    const json base = defaults;
    json merged = base;
    merged.merge_patch(doc);

    rules_config cfg;
    try {
        cfg.version = merged.at("version").get<int>();
        cfg.provenance = merged.at("provenance").get<std::string>();

        const auto& b1 = merged.at("block1");
        cfg.block1.age_split = b1.at("age_split").get<int>();
        cfg.block1.younger = band_from(b1.at("younger"));
        cfg.block1.older = band_from(b1.at("older"));
        cfg.block1.count_base = b1.at("count_base").get<int>();
        cfg.block1.older_count_min = b1.at("older_count_min").get<int>();
        cfg.block1.older_count_max = b1.at("older_count_max").get<int>();
        cfg.block1.max_follicle_size_mm = b1.at("max_follicle_size_mm").get<int>();

        cfg.block2.medicated = block2_from(merged.at("block2").at("medicated"));
        cfg.block2.natural = block2_from(merged.at("block2").at("natural"));

        const auto& mat = merged.at("maturity");
        if (!mat.is_array() || mat.size() != cfg.maturity.size()) {
            throw ivf_error(errc::invalid_config, "maturity must list exactly two rules");
        }
        for (std::size_t i = 0; i < cfg.maturity.size(); ++i) {
            cfg.maturity[i] = maturity_rule{mat[i].at("size_mm").get<int>(),
                                            mat[i].at("percent").get<int>()};
        }

        const auto& g = merged.at("growth");
        cfg.growth = growth_rules{g.at("lead_cohort").get<int>(),
                                  g.at("growing_mm_per_day").get<double>(),
                                  g.at("shrinking_mm_per_day").get<double>()};

        const auto& d = merged.at("dosing");
        cfg.dosing = dosing_rules{d.at("mini_initial_iu").get<int>(),
                                  d.at("ultra_mini_initial_iu").get<int>(),
                                  d.at("clomid_mg").get<double>(),
                                  d.at("letrozole_mg").get<double>(),
                                  d.at("step_iu").get<int>(),
                                  d.at("min_iu").get<int>(),
                                  d.at("max_iu").get<int>(),
                                  d.at("e2_high").get<double>()};

        const auto& e = merged.at("escalation");
        cfg.escalation = escalation_rules{e.at("slow_streak_limit").get<int>(),
                                          e.at("preparation_md_talk_after").get<int>(),
                                          e.at("md_talk_cancel_limit").get<int>(),
                                          e.at("cancel_on_md_talk_limit").get<bool>()};

        const auto& iv = merged.at("intervals");
        cfg.intervals = interval_rules{iv.at("stimulation_pattern").get<std::vector<int>>(),
                                       iv.at("preparation_default_days").get<int>(),
                                       iv.at("preparation_min_days").get<int>(),
                                       iv.at("preparation_max_days").get<int>(),
                                       iv.at("near_threshold_fraction").get<double>()};

        const auto& t = merged.at("trigger");
        cfg.trigger = trigger_rules{t.at("e2_split").get<double>(),
                                    t.at("big_follicle_min_mm").get<int>(),
                                    t.at("big_follicle_count").get<int>(),
                                    t.at("lh_no_trigger").get<double>(),
                                    t.at("lh_surge_ratio").get<double>(),
                                    t.at("no_trigger_hours").get<int>(),
                                    t.at("surge_hours").get<int>(),
                                    t.at("default_hours_younger").get<int>(),
                                    t.at("default_hours_older").get<int>(),
                                    t.at("age_split").get<int>(),
                                    t.at("trigger_hour").get<int>()};

        const auto& p = merged.at("post_trigger");
        cfg.post_trigger = post_trigger_rules{p.at("ovulation_window_hours").get<int>(),
                                              p.at("lps_min_age").get<int>(),
                                              p.at("lps_small_size_mm").get<int>(),
                                              p.at("lps_small_count_exclusive").get<int>()};
    } catch (const json::exception& ex) {
        throw ivf_error(errc::invalid_config, std::string("rules config: ") + ex.what());
    }

    const auto flat_base = base.flatten();
    const auto flat_merged = merged.flatten();
    for (const auto& [path, value] : flat_merged.items()) {
        if (path == "/provenance") continue;
        auto it = flat_base.find(path);
        if (it == flat_base.end() || *it != value) cfg.overrides.push_back(path);
    }
    for (const auto& [path, value] : flat_base.items()) {
        if (!value.is_null() && !flat_merged.contains(path)) cfg.overrides.push_back(path);
    }
    cfg.validate();
    return cfg;
}

void rules_config::validate() const {
    require(version >= 1, "version must be >= 1");
    require(block1.max_follicle_size_mm >= min_follicle_mm &&
                block1.max_follicle_size_mm <= max_follicle_mm,
            "block1.max_follicle_size_mm outside 2-30");
    require(block1.older_count_min <= block1.older_count_max, "older count range inverted");
    for (const auto& m : maturity) {
        require(m.size_mm >= min_follicle_mm && m.size_mm <= max_follicle_mm,
                "maturity size outside 2-30");
        require(m.percent >= 0 && m.percent <= 100, "maturity percent outside 0-100");
    }
    require(growth.lead_cohort >= 1, "growth.lead_cohort must be >= 1");
    require(growth.shrinking_mm_per_day < growth.growing_mm_per_day,
            "growth thresholds inverted");
    require(dosing.step_iu > 0 && dosing.min_iu > 0 && dosing.min_iu <= dosing.max_iu,
            "dosing bounds");
    require(dosing.mini_initial_iu % dosing.step_iu == 0 &&
                dosing.ultra_mini_initial_iu % dosing.step_iu == 0,
            "initial doses must sit on the dose step grid");
    require(escalation.slow_streak_limit >= 1, "slow_streak_limit must be >= 1");
    require(escalation.preparation_md_talk_after >= 1, "preparation_md_talk_after must be >= 1");
    require(!intervals.stimulation_pattern.empty(), "stimulation_pattern is empty");
    for (int d : intervals.stimulation_pattern) require(d >= 1, "interval days must be >= 1");
    require(intervals.preparation_min_days >= 1 &&
                intervals.preparation_min_days <= intervals.preparation_default_days &&
                intervals.preparation_default_days <= intervals.preparation_max_days,
            "preparation interval range");
    const int window = post_trigger.ovulation_window_hours;
    require(window > 0 && window <= 48, "ovulation window must be within (0, 48] hours");
    for (int h : {trigger.no_trigger_hours, trigger.surge_hours, trigger.default_hours_younger,
                  trigger.default_hours_older}) {
        require(h > 0 && h < window, "trigger durations must be positive and < ovulation window");
    }
    require(trigger.trigger_hour >= 0 && trigger.trigger_hour <= 23, "trigger_hour outside 0-23");
    require(trigger.lh_surge_ratio > 1.0, "lh_surge_ratio must exceed 1");
    require(trigger.big_follicle_min_mm >= min_follicle_mm &&
                trigger.big_follicle_min_mm <= max_follicle_mm,
            "big_follicle_min_mm outside 2-30");
    require(post_trigger.lps_small_size_mm >= min_follicle_mm &&
                post_trigger.lps_small_size_mm <= max_follicle_mm,
            "lps_small_size_mm outside 2-30");
}

rules_config load_rules_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ivf_error(errc::io_failure, "cannot open rules config '" + path + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& ex) {
        throw ivf_error(errc::invalid_config, "rules config '" + path + "': " + ex.what());
    }
    auto cfg = rules_config_from_json(doc);
    for (const auto& o : cfg.overrides) {
        std::clog << "[rules] override " << o << " (provenance: " << cfg.provenance << ")\n";
    }
    return cfg;
}

std::string config_hash(const rules_config& cfg) {
    const std::string text = hashed_json(cfg).dump();
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr);
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0x0f];
    }
    return out;
}

}  // namespace ivf::rules
