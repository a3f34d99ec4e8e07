// Copyright 2026 The autot2i Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

namespace autot2i {

using ArgValue = std::variant<std::int64_t, double, std::string>;

enum class ArgKind { integer, real, string, enumeration };

std::string_view to_string(ArgKind kind);

struct ArgSpec {
    std::string name;
    ArgKind kind = ArgKind::string;
    std::optional<double> min;
    std::optional<double> max;
    std::int64_t multiple_of = 0;        // integers only; 0 = unconstrained
    std::vector<std::string> allowed;    // enumeration only, canonical spelling
    ArgValue default_value;
};

/// One generation argument per key, keyed by schema name.
class ArgumentSet {
public:
    ArgumentSet() = default;

    void set(std::string name, ArgValue value) { values_[std::move(name)] = std::move(value); }
    bool contains(std::string_view name) const { return values_.find(name) != values_.end(); }
    const ArgValue& at(std::string_view name) const;
    const ArgValue* find(std::string_view name) const;
    std::size_t size() const { return values_.size(); }
    const std::map<std::string, ArgValue, std::less<>>& values() const { return values_; }

    bool operator==(const ArgumentSet&) const = default;

private:
    std::map<std::string, ArgValue, std::less<>> values_;
};

std::string format_value(const ArgValue& v);

/// The argument surface every model shares. Order is significant: it fixes the rendering order of
/// "key: value" blocks and the canonical serialization used for image digests.
class ArgumentSchema {
public:
    ArgumentSchema() = default;
    explicit ArgumentSchema(std::vector<ArgSpec> specs);

    /// sampler, steps, cfg_scale, width, height, seed, negative_prompt, clip_skip.
    static const ArgumentSchema& canonical();

    const std::vector<ArgSpec>& specs() const { return specs_; }
    const ArgSpec* find(std::string_view name) const;
    std::size_t size() const { return specs_.size(); }

    ArgumentSet defaults() const;

    /// Parses the textual form of a value ("30", "7.5", "euler a") for `name`, canonicalizing enum
    /// spelling and checking bounds. Throws ValidationError naming the key.
    ArgValue parse_value(std::string_view name, std::string_view raw) const;

    /// Coerces a JSON scalar into the spec's kind and validates it.
    ArgValue from_json(std::string_view name, const nlohmann::json& j) const;

    /// Throws ValidationError (field = key) on the first missing, mistyped or out-of-bounds value.
    /// Keys outside the schema are rejected.
    void validate(const ArgumentSet& args) const;
    bool is_valid(const ArgumentSet& args) const noexcept;

    /// Schema-ordered "key: value" lines.
    std::string render_block(const ArgumentSet& args) const;
    std::string canonical_serialization(const ArgumentSet& args) const { return render_block(args); }

    nlohmann::json to_json(const ArgumentSet& args) const;
    ArgumentSet args_from_json(const nlohmann::json& j) const;

private:
    void check_value(const ArgSpec& spec, const ArgValue& v) const;

    std::vector<ArgSpec> specs_;
};

}  // namespace autot2i
