/**
 * @file synth.cpp
 * @brief Synthetic cohort generator
 *
 * The physiology is deliberately coarse: follicles grow at a per-patient rate
 * scaled by scheme and dose, E2 tracks the mass of growing follicles, and the
 * other analytes sit near their scheme's window. The engine itself acts as
 * the doctor, so every recorded decision is one the engine could reach.
 */

#include "ivf/replay/synth.hpp"

#include "ivf/core/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <random>

namespace ivf::replay {

void synth_config::validate() const {
    auto fail = [](const std::string& m) { throw ivf_error(errc::invalid_config, m); };
    if (patients < 1) fail("patients must be >= 1");
    if (patients > 1000000) fail("patients must be <= 1000000");
    if (!(leniency >= 0.0 && leniency <= 1.0)) fail("leniency must be in [0, 1]");
    if (trigger_delay_min < 0 || trigger_delay_max < trigger_delay_min || trigger_delay_max > 5) {
        fail("trigger delay must satisfy 0 <= min <= max <= 5");
    }
    if (!(lh_surge_fraction >= 0.0 && lh_surge_fraction <= 1.0)) fail("lh_surge must be in [0, 1]");
    if (!(severity_coupling >= 0.0 && severity_coupling <= 1.0)) {
        fail("severity must be in [0, 1]");
    }
    if (age_min < 18 || age_max > 60 || age_min > age_max) fail("age range must lie in 18-60");
    if (max_visits < 4 || max_visits > 500) fail("max_visits must be in [4, 500]");
}

void to_json(json& j, const synth_config& c) {
    j = json{{"seed", c.seed},
             {"patients", c.patients},
             {"leniency", c.leniency},
             {"trigger_delay_min", c.trigger_delay_min},
             {"trigger_delay_max", c.trigger_delay_max},
             {"lh_surge_fraction", c.lh_surge_fraction},
             {"severity_coupling", c.severity_coupling},
             {"age_min", c.age_min},
             {"age_max", c.age_max},
             {"max_visits", c.max_visits}};
}

void from_json(const json& j, synth_config& c) {
    if (!j.is_object()) throw ivf_error(errc::invalid_config, "synthetic config must be an object");
    try {
        synth_config d;
        c.seed = j.value("seed", d.seed);
        c.patients = j.value("patients", d.patients);
        c.leniency = j.value("leniency", d.leniency);
        c.trigger_delay_min = j.value("trigger_delay_min", d.trigger_delay_min);
        c.trigger_delay_max = j.value("trigger_delay_max", c.trigger_delay_min);
        c.lh_surge_fraction = j.value("lh_surge_fraction", d.lh_surge_fraction);
        c.severity_coupling = j.value("severity_coupling", d.severity_coupling);
        c.age_min = j.value("age_min", d.age_min);
        c.age_max = j.value("age_max", d.age_max);
        c.max_visits = j.value("max_visits", d.max_visits);
    } catch (const json::exception& e) {
        throw ivf_error(errc::invalid_config, std::string("synthetic config: ") + e.what());
    }
}

namespace {

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
    T v{};
    const char* end = text.data() + text.size();
    const auto r = std::from_chars(text.data(), end, v);
    if (r.ec != std::errc{} || r.ptr != end) {
        throw ivf_error(errc::invalid_config,
                        "bad value for " + std::string(key) + ": '" + std::string(text) + "'");
    }
    return v;
}

std::pair<int, int> parse_range(std::string_view key, std::string_view text) {
    const auto dash = text.find('-', 1);
    if (dash == std::string_view::npos) {
        const int v = parse_number<int>(key, text);
        return {v, v};
    }
    return {parse_number<int>(key, text.substr(0, dash)),
            parse_number<int>(key, text.substr(dash + 1))};
}

}  // namespace

synth_config synth_config_from_string(std::string_view spec) {
    synth_config c;
    while (!spec.empty()) {
        const auto comma = spec.find(',');
        const auto item = spec.substr(0, comma);
        spec = comma == std::string_view::npos ? std::string_view{} : spec.substr(comma + 1);
        if (item.empty()) continue;
        const auto eq = item.find('=');
        if (eq == std::string_view::npos) {
            throw ivf_error(errc::invalid_config, "expected key=value, got '" + std::string(item) + "'");
        }
        const auto key = item.substr(0, eq);
        const auto value = item.substr(eq + 1);
        if (key == "seed") {
            c.seed = parse_number<std::uint64_t>(key, value);
        } else if (key == "patients") {
            c.patients = parse_number<int>(key, value);
        } else if (key == "leniency") {
            c.leniency = parse_number<double>(key, value);
        } else if (key == "trigger_delay") {
            std::tie(c.trigger_delay_min, c.trigger_delay_max) = parse_range(key, value);
        } else if (key == "lh_surge") {
            c.lh_surge_fraction = parse_number<double>(key, value);
        } else if (key == "severity") {
            c.severity_coupling = parse_number<double>(key, value);
        } else if (key == "age") {
            std::tie(c.age_min, c.age_max) = parse_range(key, value);
        } else if (key == "max_visits") {
            c.max_visits = parse_number<int>(key, value);
        } else {
            throw ivf_error(errc::invalid_config, "unknown synthetic key '" + std::string(key) + "'");
        }
    }
    c.validate();
    return c;
}

namespace {

/// Bit-exact across standard libraries, unlike std::*_distribution.
class sim_rng {
public:
    explicit sim_rng(std::uint64_t seed) : g_(seed) {}

    double uniform() { return static_cast<double>(g_() >> 11) * 0x1.0p-53; }
    int range(int lo, int hi) {
        return lo + static_cast<int>(uniform() * static_cast<double>(hi - lo + 1));
    }
    bool chance(double p) { return uniform() < p; }
    double normal(double mean, double sd) {
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        return mean + sd * std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

private:
    std::mt19937_64 g_;
};

std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double round_to(double v, double step) { return std::round(v / step) * step; }

analyte_reading exact(double v, double step = 0.1) {
    return analyte_reading{round_to(std::max(v, step), step), analyte_flag::exact};
}

struct follicle {
    double size;
    double rate;  ///< relative growth factor
};

class patient_sim {
public:
    patient_sim(const synth_config& cfg, const rules::engine& eng, int index)
        : cfg_(cfg), eng_(eng), rng_(mix(cfg.seed ^ mix(static_cast<std::uint64_t>(index)))) {
        char id[16];
        std::snprintf(id, sizeof id, "S%05d", index + 1);
        profile_.patient_id = id;
        profile_.age = rng_.range(cfg.age_min, cfg.age_max);
        profile_.medication_contraindicated = rng_.chance(0.05);
        severity_ = rng_.uniform() * cfg.severity_coupling;
        surge_ = rng_.chance(cfg.lh_surge_fraction);
        surge_no_trigger_ = rng_.chance(0.5);
        date_ = std::chrono::sys_days{std::chrono::year{2024} / 1 / 1} +
                std::chrono::days{rng_.range(0, 364)};

        const auto& b1 = eng.config().block1;
        if (profile_.age < b1.age_split) {
            const double need = b1.count_base - profile_.age;
            antral_ = static_cast<int>(std::lround(need * (1.25 - 0.6 * severity_) + rng_.normal(0, 1.5)));
        } else {
            antral_ = rng_.range(2, 7) - static_cast<int>(std::lround(2 * severity_));
        }
        antral_ = std::clamp(antral_, 1, 25);
    }

    void run(dataset& out) {
        auto state = cycle_state::fresh(profile_);
        int prep_visits = 0;
        int stim_visits = 0;
        std::optional<calendar_date> first_engine_trigger;
        int delay = 0;

        for (int n = 0; n < cfg_.max_visits; ++n) {
            if (state.block == cycle_block::done || state.block == cycle_block::cancelled) break;
            if (prep_visits > 10 || stim_visits > 30) break;

            visit_record v;
            v.patient_id = profile_.patient_id;
            v.cycle_number = 1;
            v.visit_date = date_;
            measure(state, v);

            const auto advice = eng_.advise(state, v).output;
            decision doctor = advice.verdict;
            const auto type = advice.verdict.type;
            bool delaying = false;

            switch (state.block) {
                case cycle_block::b1:
                    ++prep_visits;
                    if (type == decision_type::continue_ocp && rng_.chance(cfg_.leniency)) {
                        doctor = decision::start_stimulation(
                            rules::select_scheme(profile_, v.panel, v.exam, eng_.config().block1));
                    }
                    break;
                case cycle_block::b2:
                case cycle_block::lps:
                    ++stim_visits;
                    if (type == decision_type::trigger && !first_engine_trigger) {
                        first_engine_trigger = date_;
                        delay = rng_.range(cfg_.trigger_delay_min, cfg_.trigger_delay_max);
                    }
                    if (first_engine_trigger) {
                        if (days_between(*first_engine_trigger, date_) < delay) {
                            doctor = decision::of(decision_type::continue_stimulation);
                            delaying = true;
                        } else if (type != decision_type::trigger) {
                            doctor = decision::of(decision_type::trigger);
                        }
                    } else if (type == decision_type::adjust_medication &&
                               rng_.chance(cfg_.leniency)) {
                        doctor = decision::of(decision_type::continue_stimulation);
                    } else if (type == decision_type::continue_stimulation &&
                               state.active_scheme != scheme::natural_ivf &&
                               rng_.chance(cfg_.leniency)) {
                        doctor = decision::of(decision_type::adjust_medication);
                    }
                    break;
                case cycle_block::b4:
                    if (type == decision_type::start_lps && rng_.chance(cfg_.leniency)) {
                        doctor = decision::of(decision_type::cycle_complete);
                    }
                    break;
                default:
                    break;
            }

            v.doctor_decision = doctor;
            const auto applied = eng_.apply(state, v, doctor);
            const auto& next = applied.next;
            out.visits.push_back(v);

            if (doctor.type == decision_type::oocyte_retrieval) retrieve(out, state);
            if (doctor.type == decision_type::start_stimulation ||
                doctor.type == decision_type::start_lps) {
                begin_stimulation(doctor.type == decision_type::start_lps);
            }
            if (doctor.type == decision_type::trigger) first_engine_trigger.reset();

            auto days = rules::next_visit_in_days(state, v, doctor.type, next, eng_.config());
            if (delaying) days = 1;
            state = next;
            if (!days) break;
            advance(state, *days);
        }
    }

    const patient_profile& profile() const { return profile_; }

private:
    void measure(const cycle_state& state, visit_record& v) {
        v.panel.drawn_at = at_time(v.visit_date, 8);
        v.exam.measured_at = at_time(v.visit_date, 9);
        const double s = severity_;

        if (state.block == cycle_block::b1) {
            const double f = std::max(0.6, 1.0 - 0.08 * prep_count_++);
            v.panel.fsh = exact((7.0 + 9.0 * s) * f + rng_.normal(0, 1.5));
            v.panel.lh = exact((3.5 + 4.0 * s) * f + rng_.normal(0, 1.0));
            v.panel.e2 = exact((30.0 + 35.0 * s) * f + rng_.normal(0, 6.0), 1.0);
            set_p4(v, 0.5 + rng_.normal(0, 0.25));
            const int n = std::max(1, antral_ + static_cast<int>(std::lround(rng_.normal(0, 1.0))));
            for (int i = 0; i < n; ++i) v.exam.bins[rng_.range(2, 8)] += 1;
            if (rng_.chance(0.25 * s * f)) v.exam.bins[rng_.range(10, 14)] += 1;
            return;
        }

        const bool natural = state.active_scheme == scheme::natural_ivf;
        const int dose = state.current_prescription.gonadotropin.dose_iu;
        const bool stimulating = state.block == cycle_block::b2 || state.block == cycle_block::lps;
        if (natural || !stimulating) {
            v.panel.fsh = exact(8.0 + rng_.normal(0, 2.0));
        } else {
            v.panel.fsh = exact(13.5 + dose / 40.0 + rng_.normal(0, 1.2));
        }
        if (natural && v.panel.fsh->value < 5.5) v.panel.fsh = exact(5.5);

        double lh = natural ? 5.0 + rng_.normal(0, 1.5) : 4.0 + rng_.normal(0, 1.2);
        lh = std::max(lh, natural ? 2.2 : 0.8);
        if (surge_ && stimulating && lead() >= 17.0) {
            lh = surge_no_trigger_ ? 30.0 + rng_.normal(0, 2.0) : last_lh_ * 2.5;
        }
        v.panel.lh = exact(lh);
        last_lh_ = v.panel.lh->value;

        double e2 = 40.0;
        for (const auto& f : follicles_) e2 += std::max(0.0, f.size - 8.0) * 28.0;
        v.panel.e2 = exact(e2 * (1.0 + rng_.normal(0, 0.05)), 1.0);

        double p4 = 0.5 + rng_.normal(0, 0.15);
        if (stimulating && rng_.chance(0.03 * s)) p4 = 1.4;
        if (!stimulating) p4 = 1.5 + rng_.normal(0, 0.3);
        set_p4(v, p4);

        for (const auto& f : follicles_) v.exam.bins[bin_for_size(f.size)] += 1;
        if (v.exam.bins.empty()) v.exam.bins[rng_.range(3, 6)] = 1;
    }

    void set_p4(visit_record& v, double p4) {
        if (p4 < 0.2) {
            v.panel.p4 = analyte_reading{0.2, analyte_flag::below_detection};
        } else {
            v.panel.p4 = exact(p4, 0.01);
        }
    }

    double lead() const {
        double m = 0.0;
        for (const auto& f : follicles_) m = std::max(m, f.size);
        return m;
    }

    void begin_stimulation(bool lps) {
        if (!lps) {
            follicles_.clear();
            for (int i = 0; i < antral_; ++i) {
                follicles_.push_back({2.0 + 6.0 * rng_.uniform(),
                                      std::max(0.6, rng_.normal(1.0, 0.12))});
            }
        }
        for (auto& f : follicles_) f.rate = std::max(0.6, rng_.normal(1.0, 0.12));
    }

    /// Moves the clock `days` ahead and grows the follicles for that long.
    void advance(const cycle_state& state, int days) {
        date_ += std::chrono::days{days};
        const bool stimulating = state.block == cycle_block::b2 || state.block == cycle_block::lps;
        if (!stimulating && state.block != cycle_block::b3 && state.block != cycle_block::b4) return;
        double base = 1.2;
        if (state.active_scheme == scheme::mini_ivf) base = 1.5;
        if (state.active_scheme == scheme::ultra_mini_ivf) base = 1.3;
        base *= 1.0 - 0.55 * severity_;
        if (state.active_scheme != scheme::natural_ivf) {
            base *= 0.85 + 0.1 * state.current_prescription.gonadotropin.dose_iu / 75.0;
        }
        if (!stimulating) base *= 0.5;
        for (int d = 0; d < days; ++d) {
            for (auto& f : follicles_) {
                f.size = std::min(26.0, f.size + base * f.rate + rng_.normal(0, 0.1));
                f.size = std::max(2.0, f.size);
            }
        }
    }

    void retrieve(dataset& out, const cycle_state& state) {
        int mature = 0;
        std::vector<follicle> left;
        for (const auto& f : follicles_) {
            if (f.size >= 14.0) {
                ++mature;
            } else {
                left.push_back(f);
            }
        }
        const double yield = std::clamp(
            0.9 - 0.3 * severity_ - 0.15 * state.md_talk_count + rng_.normal(0, 0.05), 0.0, 1.0);
        out.retrievals.push_back(
            {profile_.patient_id, 1, date_, static_cast<int>(std::lround(mature * yield))});
        // Fresh small antral follicles appear in the luteal phase.
        const int fresh = rng_.range(1, 8);
        for (int i = 0; i < fresh; ++i) left.push_back({3.0 + 6.0 * rng_.uniform(), 1.0});
        follicles_ = std::move(left);
    }

    const synth_config& cfg_;
    const rules::engine& eng_;
    sim_rng rng_;
    patient_profile profile_;
    double severity_{0.0};
    bool surge_{false};
    bool surge_no_trigger_{false};
    int antral_{1};
    int prep_count_{0};
    double last_lh_{4.0};
    calendar_date date_{};
    std::vector<follicle> follicles_;
};

}  // namespace

dataset synth_cohort(const synth_config& cfg, const rules::engine& eng) {
    cfg.validate();
    dataset out;
    for (int i = 0; i < cfg.patients; ++i) {
        patient_sim sim(cfg, eng, i);
        out.patients.push_back(sim.profile());
        sim.run(out);
    }
    out.sort();
    return out;
}

dataset synth_cohort(std::uint64_t seed, int n_patients, synth_config cfg,
                     const rules::engine& eng) {
    cfg.seed = seed;
    cfg.patients = n_patients;
    return synth_cohort(cfg, eng);
}

}  // namespace ivf::replay
