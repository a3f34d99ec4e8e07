// Copyright 2026 The autot2i Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "autot2i/error.hpp"
#include "autot2i/http.hpp"

namespace autot2i {

struct ConfigIssue {
    std::string field;
    std::string message;
};

class ConfigError : public Error {
public:
    explicit ConfigError(std::vector<ConfigIssue> issues);
    const std::vector<ConfigIssue>& issues() const { return issues_; }

private:
    std::vector<ConfigIssue> issues_;
};

/// Defaults merged with a user JSON file and dotted-key overrides.
class AppConfig {
public:
    static nlohmann::json defaults();
    static AppConfig from_json(const nlohmann::json& user);
    static AppConfig load(const std::filesystem::path& path);

    /// Sets a dotted key ("selector.preset"); numbers and booleans in `raw` are parsed as JSON.
    void set(std::string_view dotted, std::string_view raw);
    void set_json(std::string_view dotted, nlohmann::json value);

    const nlohmann::json& at(std::string_view dotted) const;
    bool has(std::string_view dotted) const;
    std::string str(std::string_view dotted) const;
    std::filesystem::path path(std::string_view dotted) const;

    /// Every problem for `command`, not just the first.
    std::vector<ConfigIssue> check(std::string_view command) const;
    void validate(std::string_view command) const;

    HttpOptions http_options() const;
    const nlohmann::json& resolved() const { return raw_; }

private:
    nlohmann::json raw_;
};

}  // namespace autot2i
