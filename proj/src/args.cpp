// Copyright 2026 The autot2i Authors
// SPDX-License-Identifier: Apache-2.0

#include "autot2i/args.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <set>

#include "autot2i/error.hpp"
#include "autot2i/text.hpp"

namespace autot2i {

std::string_view to_string(ArgKind kind) {
    switch (kind) {
        case ArgKind::integer: return "integer";
        case ArgKind::real: return "real";
        case ArgKind::string: return "string";
        case ArgKind::enumeration: return "enum";
    }
    return "unknown";
}

const ArgValue& ArgumentSet::at(std::string_view name) const {
    auto it = values_.find(name);
    if (it == values_.end()) throw ValidationError(std::string(name), "missing argument");
    return it->second;
}

const ArgValue* ArgumentSet::find(std::string_view name) const {
    auto it = values_.find(name);
    return it == values_.end() ? nullptr : &it->second;
}

std::string format_value(const ArgValue& v) {
    return std::visit(
        [](const auto& x) -> std::string {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, std::string>) {
                return x;
            } else if constexpr (std::is_same_v<T, double>) {
                char buf[64];
                auto res = std::to_chars(buf, buf + sizeof(buf), x);
                std::string s(buf, res.ptr);
                if (s.find_first_of(".eE") == std::string::npos && std::isfinite(x)) s += ".0";
                return s;
            } else {
                return std::to_string(x);
            }
        },
        v);
}

ArgumentSchema::ArgumentSchema(std::vector<ArgSpec> specs) : specs_(std::move(specs)) {
    std::set<std::string> seen;
    for (const auto& s : specs_) {
        if (s.name.empty()) throw ValidationError("", "argument spec with empty name");
        if (!seen.insert(s.name).second) throw ValidationError(s.name, "duplicate argument name in schema");
        if (s.kind == ArgKind::enumeration && s.allowed.empty())
            throw ValidationError(s.name, "enum argument without allowed values");
        check_value(s, s.default_value);
    }
}

const ArgumentSchema& ArgumentSchema::canonical() {
    static const ArgumentSchema schema{std::vector<ArgSpec>{
        {"sampler", ArgKind::enumeration, {}, {}, 0,
         {"Euler a", "Euler", "LMS", "Heun", "DPM2", "DPM2 a", "DPM++ 2S a", "DPM++ 2M", "DPM++ SDE",
          "DPM++ 2M SDE", "DPM++ 2M Karras", "DPM++ SDE Karras", "DPM++ 2M SDE Karras", "DPM2 Karras",
          "DPM2 a Karras", "LMS Karras", "DDIM", "PLMS", "UniPC", "LCM"},
         std::string("Euler a")},
        {"steps", ArgKind::integer, 1, 150, 0, {}, std::int64_t{20}},
        {"cfg_scale", ArgKind::real, 0.0, 30.0, 0, {}, 7.0},
        {"width", ArgKind::integer, 64, 2048, 8, {}, std::int64_t{512}},
        {"height", ArgKind::integer, 64, 2048, 8, {}, std::int64_t{512}},
        {"seed", ArgKind::integer, -1, {}, 0, {}, std::int64_t{-1}},
        {"negative_prompt", ArgKind::string, {}, {}, 0, {}, std::string()},
        {"clip_skip", ArgKind::integer, 1, 12, 0, {}, std::int64_t{1}},
    }};
    return schema;
}

const ArgSpec* ArgumentSchema::find(std::string_view name) const {
    for (const auto& s : specs_)
        if (s.name == name) return &s;
    return nullptr;
}

ArgumentSet ArgumentSchema::defaults() const {
    ArgumentSet out;
    for (const auto& s : specs_) out.set(s.name, s.default_value);
    return out;
}

void ArgumentSchema::check_value(const ArgSpec& spec, const ArgValue& v) const {
    switch (spec.kind) {
        case ArgKind::integer: {
            auto* x = std::get_if<std::int64_t>(&v);
            if (!x) throw ValidationError(spec.name, "expected an integer");
            if (spec.min && static_cast<double>(*x) < *spec.min)
                throw ValidationError(spec.name, "value " + std::to_string(*x) + " below minimum " + format_value(*spec.min));
            if (spec.max && static_cast<double>(*x) > *spec.max)
                throw ValidationError(spec.name, "value " + std::to_string(*x) + " above maximum " + format_value(*spec.max));
            if (spec.multiple_of > 0 && *x % spec.multiple_of != 0)
                throw ValidationError(spec.name, "value " + std::to_string(*x) + " is not a multiple of " +
                                                     std::to_string(spec.multiple_of));
            break;
        }
        case ArgKind::real: {
            auto* x = std::get_if<double>(&v);
            if (!x) throw ValidationError(spec.name, "expected a real number");
            if (!std::isfinite(*x)) throw ValidationError(spec.name, "non-finite value");
            if (spec.min && *x < *spec.min)
                throw ValidationError(spec.name, "value " + format_value(*x) + " below minimum " + format_value(*spec.min));
            if (spec.max && *x > *spec.max)
                throw ValidationError(spec.name, "value " + format_value(*x) + " above maximum " + format_value(*spec.max));
            break;
        }
        case ArgKind::string:
            if (!std::holds_alternative<std::string>(v)) throw ValidationError(spec.name, "expected a string");
            break;
        case ArgKind::enumeration: {
            auto* x = std::get_if<std::string>(&v);
            if (!x) throw ValidationError(spec.name, "expected an enum string");
            bool ok = false;
            for (const auto& a : spec.allowed) ok = ok || text::iequals(a, *x);
            if (!ok) throw ValidationError(spec.name, "'" + *x + "' is not an allowed value");
            break;
        }
    }
}

ArgValue ArgumentSchema::parse_value(std::string_view name, std::string_view raw) const {
    const ArgSpec* spec = find(name);
    if (!spec) throw ValidationError(std::string(name), "unknown argument");
    std::string t = text::trim(raw);
    ArgValue v;
    switch (spec->kind) {
        case ArgKind::integer: {
            std::int64_t x = 0;
            // Accept "30.0" style integers that some backends emit.
            auto res = std::from_chars(t.data(), t.data() + t.size(), x);
            if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
                double d = 0;
                auto r2 = std::from_chars(t.data(), t.data() + t.size(), d);
                if (r2.ec != std::errc() || r2.ptr != t.data() + t.size() || d != std::floor(d) ||
                    std::fabs(d) > 9.0e15)
                    throw ValidationError(spec->name, "cannot parse '" + t + "' as integer");
                x = static_cast<std::int64_t>(d);
            }
            v = x;
            break;
        }
        case ArgKind::real: {
            double d = 0;
            auto res = std::from_chars(t.data(), t.data() + t.size(), d);
            if (res.ec != std::errc() || res.ptr != t.data() + t.size())
                throw ValidationError(spec->name, "cannot parse '" + t + "' as real");
            v = d;
            break;
        }
        case ArgKind::string:
            if (t.size() >= 2 && t.front() == '"' && t.back() == '"') t = t.substr(1, t.size() - 2);
            v = t;
            break;
        case ArgKind::enumeration: {
            std::string found;
            for (const auto& a : spec->allowed)
                if (text::iequals(a, t)) found = a;
            if (found.empty()) throw ValidationError(spec->name, "'" + t + "' is not an allowed value");
            v = found;
            break;
        }
    }
    check_value(*spec, v);
    return v;
}

ArgValue ArgumentSchema::from_json(std::string_view name, const nlohmann::json& j) const {
    const ArgSpec* spec = find(name);
    if (!spec) throw ValidationError(std::string(name), "unknown argument");
    ArgValue v;
    switch (spec->kind) {
        case ArgKind::integer:
            if (j.is_number_integer()) {
                v = j.get<std::int64_t>();
            } else if (j.is_number_float() && j.get<double>() == std::floor(j.get<double>())) {
                v = static_cast<std::int64_t>(j.get<double>());
            } else {
                throw ValidationError(spec->name, "expected an integer");
            }
            break;
        case ArgKind::real:
            if (!j.is_number()) throw ValidationError(spec->name, "expected a number");
            v = j.get<double>();
            break;
        case ArgKind::string:
            if (!j.is_string()) throw ValidationError(spec->name, "expected a string");
            v = j.get<std::string>();
            break;
        case ArgKind::enumeration:
            if (!j.is_string()) throw ValidationError(spec->name, "expected a string");
            return parse_value(name, j.get<std::string>());
    }
    check_value(*spec, v);
    return v;
}

void ArgumentSchema::validate(const ArgumentSet& args) const {
    for (const auto& s : specs_) {
        const ArgValue* v = args.find(s.name);
        if (!v) throw ValidationError(s.name, "missing argument");
        check_value(s, *v);
    }
    for (const auto& [k, _] : args.values())
        if (!find(k)) throw ValidationError(k, "argument not in schema");
}

bool ArgumentSchema::is_valid(const ArgumentSet& args) const noexcept {
    try {
        validate(args);
        return true;
    } catch (const std::exception&) {
        return false;
    }
}

std::string ArgumentSchema::render_block(const ArgumentSet& args) const {
    std::string out;
    for (const auto& s : specs_) {
        const ArgValue* v = args.find(s.name);
        if (!v) continue;
        out += s.name;
        out += ": ";
        out += format_value(*v);
        out += '\n';
    }
    return out;
}

nlohmann::json ArgumentSchema::to_json(const ArgumentSet& args) const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : args.values()) std::visit([&](const auto& x) { j[k] = x; }, v);
    return j;
}

ArgumentSet ArgumentSchema::args_from_json(const nlohmann::json& j) const {
    if (!j.is_object()) throw ValidationError("args", "expected an object");
    ArgumentSet out;
    for (auto it = j.begin(); it != j.end(); ++it) out.set(it.key(), from_json(it.key(), it.value()));
    validate(out);
    return out;
}

}  // namespace autot2i
