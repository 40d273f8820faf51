/**
 * @file parse.cpp
 * @brief Hormone value and follicle map parsers
 */

#include "ivf/ingest/parse.hpp"

#include "ivf/core/serialize.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>

namespace ivf::ingest {

namespace {

constexpr double max_hormone_value = 1e9;
constexpr int max_bin_count = 500;

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}
bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

std::string lower_compact(std::string_view s) {
    std::string out;
    for (const char c : s) {
        if (is_space(c)) continue;
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

template <typename T>
parse_result<T> failure(std::string reason, std::string_view offending,
                        errc code = errc::unparseable) {
    parse_result<T> r;
    r.code = code;
    r.reason = std::move(reason);
    r.offending = std::string(offending.substr(0, 64));
    return r;
}

bool all_digits(std::string_view s) {
    return std::all_of(s.begin(), s.end(), is_digit);
}

/// Thousands groups: first 1-3 digits, every later group exactly 3.
bool valid_groups(std::string_view integer, char sep, std::string& digits) {
    std::size_t start = 0;
    bool first = true;
    while (true) {
        const auto pos = integer.find(sep, start);
        const auto group = integer.substr(start, pos == std::string_view::npos ? pos : pos - start);
        if (!all_digits(group)) return false;
        if (first ? (group.empty() || group.size() > 3) : group.size() != 3) return false;
        digits.append(group);
        first = false;
        if (pos == std::string_view::npos) return true;
        start = pos + 1;
    }
}

/// Rewrites a run of digits and separators into plain "123.45" form.
std::optional<std::string> normalize_number(std::string_view run) {
    const auto dots = std::count(run.begin(), run.end(), '.');
    const auto commas = std::count(run.begin(), run.end(), ',');
    std::string out;

    const auto decimal = [&](std::string_view integer, std::string_view fraction,
                             std::optional<char> thousands) -> std::optional<std::string> {
        std::string digits;
        if (thousands) {
            if (!valid_groups(integer, *thousands, digits)) return std::nullopt;
        } else {
            if (!all_digits(integer)) return std::nullopt;
            digits = std::string(integer);
        }
        if (!all_digits(fraction) || (digits.empty() && fraction.empty())) return std::nullopt;
        return (digits.empty() ? "0" : digits) + (fraction.empty() ? "" : "." + std::string(fraction));
    };

    if (dots > 0 && commas > 0) {
        const auto last_dot = run.rfind('.');
        const auto last_comma = run.rfind(',');
        const char mark = last_dot > last_comma ? '.' : ',';
        const char thousands = mark == '.' ? ',' : '.';
        const auto pos = std::max(last_dot, last_comma);
        if (std::count(run.begin(), run.end(), mark) != 1) return std::nullopt;
        return decimal(run.substr(0, pos), run.substr(pos + 1), thousands);
    }
    const char sep = dots > 0 ? '.' : ',';
    const auto count = dots + commas;
    if (count == 0) return decimal(run, {}, std::nullopt);
    if (count == 1) {
        const auto pos = run.find(sep);
        const auto integer = run.substr(0, pos);
        const auto fraction = run.substr(pos + 1);
        const bool nonzero_integer =
            !integer.empty() && std::any_of(integer.begin(), integer.end(),
                                            [](char c) { return c != '0'; });
        if (sep == ',' && fraction.size() == 3 && integer.size() <= 3 && nonzero_integer &&
            all_digits(integer) && all_digits(fraction)) {
            return std::string(integer) + std::string(fraction);
        }
        return decimal(integer, fraction, std::nullopt);
    }
    std::string digits;
    if (!valid_groups(run, sep, digits)) return std::nullopt;
    return digits;
}

enum class dimension { gonadotropin, estradiol, progesterone };

struct unit_entry {
    std::string_view name;
    dimension dim;
    double divisor;
};

constexpr std::array<unit_entry, 8> units{{
    {"miu/ml", dimension::gonadotropin, 1.0},
    {"iu/l", dimension::gonadotropin, 1.0},
    {"mu/ml", dimension::gonadotropin, 1.0},
    {"u/l", dimension::gonadotropin, 1.0},
    {"pg/ml", dimension::estradiol, 1.0},
    {"pmol/l", dimension::estradiol, 3.671},
    {"ng/ml", dimension::progesterone, 1.0},
    {"nmol/l", dimension::progesterone, 3.18},
}};

dimension dimension_of(analyte a) {
    switch (a) {
        case analyte::fsh:
        case analyte::lh: return dimension::gonadotropin;
        case analyte::e2: return dimension::estradiol;
        case analyte::p4: return dimension::progesterone;
    }
    return dimension::gonadotropin;
}

/// Parses "14.5" / "14,5" / "15" as a non-negative size.
std::optional<double> parse_size(std::string_view s) {
    s = trim(s);
    if (s.size() >= 2) {
        const auto tail = lower_compact(s.substr(s.size() - 2));
        if (tail == "mm") s = trim(s.substr(0, s.size() - 2));
    }
    if (s.empty() || s.size() > 12) return std::nullopt;
    if (!std::all_of(s.begin(), s.end(), [](char c) { return is_digit(c) || c == '.' || c == ','; })) {
        return std::nullopt;
    }
    if (std::count(s.begin(), s.end(), '.') + std::count(s.begin(), s.end(), ',') > 1) {
        return std::nullopt;
    }
    std::string text(s);
    std::replace(text.begin(), text.end(), ',', '.');
    if (text.front() == '.') text.insert(text.begin(), '0');
    if (text.back() == '.') text.pop_back();
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
    return v;
}

std::optional<int> parse_count(std::string_view s) {
    s = trim(s);
    if (s.empty() || s.size() > 6 || !all_digits(s)) return std::nullopt;
    int v = 0;
    std::from_chars(s.data(), s.data() + s.size(), v);
    return v;
}

/// Adds `count` at `size_mm`, rounding and clamping the size.
void add_bin(follicle_histogram& h, double size_mm, int count, std::vector<std::string>& warnings) {
    int bin = bin_for_size(size_mm);
    if (bin < min_follicle_mm || bin > max_follicle_mm) {
        const int clamped = std::clamp(bin, min_follicle_mm, max_follicle_mm);
        warnings.push_back("follicle size " + std::to_string(bin) + " mm clamped to " +
                           std::to_string(clamped) + " mm");
        bin = clamped;
    }
    if (count > 0) h.bins[bin] += count;
}

parse_result<follicle_histogram> parse_json_map(std::string_view text) {
    const auto doc = json::parse(text.begin(), text.end(), nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        return failure<follicle_histogram>("malformed follicle JSON object", text);
    }
    parse_result<follicle_histogram> out;
    follicle_histogram h;
    for (const auto& [key, value] : doc.items()) {
        const auto size = parse_size(key);
        if (!size) return failure<follicle_histogram>("invalid follicle size", key);
        std::optional<long long> count;
        if (value.is_number_integer()) {
            count = value.get<long long>();
        } else if (value.is_number_float()) {
            const double d = value.get<double>();
            if (std::isfinite(d) && d == std::floor(d) && std::abs(d) < 1e9) {
                count = static_cast<long long>(d);
            }
        } else if (value.is_string()) {
            const auto s = trim(value.get_ref<const std::string&>());
            if (!s.empty() && s.front() == '-' && parse_count(s.substr(1))) {
                count = -1;
            } else if (const auto c = parse_count(s)) {
                count = *c;
            }
        }
        if (!count) return failure<follicle_histogram>("invalid follicle count", value.dump());
        if (*count < 0) {
            return failure<follicle_histogram>("negative follicle count", key + ":" + value.dump(),
                                               errc::negative_count);
        }
        if (*count > max_bin_count) {
            return failure<follicle_histogram>("implausible follicle count", value.dump());
        }
        add_bin(h, *size, static_cast<int>(*count), out.warnings);
    }
    out.value = std::move(h);
    return out;
}

parse_result<follicle_histogram> parse_list(std::string_view text) {
    parse_result<follicle_histogram> out;
    follicle_histogram h;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto end = text.find_first_of(",;", start);
        const auto item = trim(text.substr(start, end == std::string_view::npos ? end : end - start));
        start = end == std::string_view::npos ? text.size() + 1 : end + 1;
        if (item.empty()) {
            out.warnings.push_back("empty follicle list item ignored");
            continue;
        }
        const auto sep = item.find_first_of("xX*:");
        const auto size_text = item.substr(0, sep);
        const auto size = parse_size(size_text);
        if (!size) return failure<follicle_histogram>("invalid follicle size", item);
        int count = 1;
        if (sep != std::string_view::npos) {
            const auto count_text = trim(item.substr(sep + 1));
            if (!count_text.empty() && count_text.front() == '-' &&
                parse_count(count_text.substr(1))) {
                return failure<follicle_histogram>("negative follicle count", item,
                                                   errc::negative_count);
            }
            const auto c = parse_count(count_text);
            if (!c) return failure<follicle_histogram>("invalid follicle count", item);
            if (*c > max_bin_count) {
                return failure<follicle_histogram>("implausible follicle count", item);
            }
            count = *c;
        }
        add_bin(h, *size, count, out.warnings);
    }
    out.value = std::move(h);
    return out;
}

}  // namespace

// =============================================================================
// Hormone values
// =============================================================================

parse_result<analyte_reading> try_parse_hormone_value(std::string_view raw,
                                                      std::optional<analyte> target) {
    using R = analyte_reading;
    const auto text = trim(raw);
    if (text.empty()) return failure<R>("empty hormone value", raw);

    std::size_t i = 0;
    analyte_flag flag = analyte_flag::exact;
    if (text[i] == '<' || text[i] == '>') {
        flag = text[i] == '<' ? analyte_flag::below_detection : analyte_flag::above_detection;
        ++i;
        if (i < text.size() && text[i] == '=') ++i;
        while (i < text.size() && is_space(text[i])) ++i;
    }
    if (i < text.size() && text[i] == '+') ++i;
    if (i < text.size() && text[i] == '-') {
        std::size_t j = i + 1;
        while (j < text.size() && (is_digit(text[j]) || text[j] == '.' || text[j] == ',')) ++j;
        return failure<R>("negative hormone value", text.substr(i, j - i));
    }

    const std::size_t number_start = i;
    while (i < text.size() && (is_digit(text[i]) || text[i] == '.' || text[i] == ',')) ++i;
    const auto run = text.substr(number_start, i - number_start);
    if (std::none_of(run.begin(), run.end(), is_digit)) {
        return failure<R>("no numeric value", text.substr(number_start));
    }
    const auto normalized = normalize_number(run);
    if (!normalized) return failure<R>("malformed number", run);
    if (normalized->size() > 400) return failure<R>("number too long", run);

    double value = 0.0;
    const auto [ptr, ec] =
        std::from_chars(normalized->data(), normalized->data() + normalized->size(), value);
    if (ec != std::errc{} || ptr != normalized->data() + normalized->size() ||
        !std::isfinite(value)) {
        return failure<R>("malformed number", run);
    }
    if (value > max_hormone_value) return failure<R>("implausible hormone value", run);

    const auto unit_text = trim(text.substr(i));
    if (!unit_text.empty()) {
        const auto key = lower_compact(unit_text);
        const auto it = std::find_if(units.begin(), units.end(),
                                     [&](const unit_entry& u) { return u.name == key; });
        if (it == units.end()) return failure<R>("unrecognised unit or trailing text", unit_text);
        if (target) {
            if (dimension_of(*target) != it->dim) {
                return failure<R>("unit incompatible with " + std::string(to_string(*target)),
                                  unit_text);
            }
        } else if (it->divisor != 1.0) {
            return failure<R>("unit conversion needs a known analyte", unit_text);
        }
        value /= it->divisor;
    }

    parse_result<R> out;
    out.value = R{value, flag};
    return out;
}

analyte_reading parse_hormone_value(std::string_view raw, std::optional<analyte> target) {
    auto r = try_parse_hormone_value(raw, target);
    if (!r.ok()) throw ivf_error(r.code, r.message());
    return *r.value;
}

std::string format_hormone_value(const analyte_reading& reading) {
    std::array<char, 512> buf{};
    const auto [ptr, ec] =
        std::to_chars(buf.data(), buf.data() + buf.size(), reading.value, std::chars_format::fixed);
    std::string number = ec == std::errc{} ? std::string(buf.data(), ptr) : std::string("0");
    switch (reading.flag) {
        case analyte_flag::below_detection: return "<" + number;
        case analyte_flag::above_detection: return ">" + number;
        case analyte_flag::exact: break;
    }
    return number;
}

// =============================================================================
// Follicle maps
// =============================================================================

parse_result<follicle_histogram> try_parse_follicle_map(std::string_view raw) {
    const auto text = trim(raw);
    const auto key = lower_compact(text);
    if (key.empty() || key == "none" || key == "-") {
        parse_result<follicle_histogram> out;
        out.value = follicle_histogram{};
        return out;
    }
    return text.front() == '{' ? parse_json_map(text) : parse_list(text);
}

follicle_histogram parse_follicle_map(std::string_view raw, std::vector<std::string>* warnings) {
    auto r = try_parse_follicle_map(raw);
    if (!r.ok()) throw ivf_error(r.code, r.message());
    if (warnings) warnings->insert(warnings->end(), r.warnings.begin(), r.warnings.end());
    return *r.value;
}

std::string format_follicle_map(const follicle_histogram& exam) {
    return json(exam).at("bins").dump();
}

// =============================================================================
// Names
// =============================================================================

namespace {

std::string name_key(std::string_view s) {
    std::string out;
    for (const char c : s) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
    }
    return out;
}

}  // namespace

std::optional<decision_type> parse_decision_name(std::string_view raw) {
    const auto key = name_key(raw);
    if (key.empty()) return std::nullopt;
    for (const auto d : all_decision_types) {
        if (name_key(to_string(d)) == key) return d;
    }
    struct alias {
        std::string_view name;
        decision_type type;
    };
    static constexpr alias aliases[] = {
        {"ocp", decision_type::continue_ocp},
        {"continuepill", decision_type::continue_ocp},
        {"doctortalk", decision_type::md_talk},
        {"stimulation", decision_type::start_stimulation},
        {"adjust", decision_type::adjust_medication},
        {"adjustdose", decision_type::adjust_medication},
        {"triggershot", decision_type::trigger},
        {"notrigger", decision_type::trigger},
        {"retrieval", decision_type::oocyte_retrieval},
        {"eggretrieval", decision_type::oocyte_retrieval},
        {"lps", decision_type::start_lps},
        {"complete", decision_type::cycle_complete},
        {"done", decision_type::cycle_complete},
    };
    for (const auto& a : aliases) {
        if (a.name == key) return a.type;
    }
    return std::nullopt;
}

std::optional<scheme> parse_scheme_name(std::string_view raw) {
    auto key = name_key(raw);
    if (key.size() > 3 && key.compare(key.size() - 3, 3, "ivf") == 0) key.resize(key.size() - 3);
    if (key == "mini") return scheme::mini_ivf;
    if (key == "ultramini") return scheme::ultra_mini_ivf;
    if (key == "natural") return scheme::natural_ivf;
    return std::nullopt;
}

}  // namespace ivf::ingest
