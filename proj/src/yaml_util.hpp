#pragma once

#include <yaml-cpp/yaml.h>

#include <string>

#include "ptkit/transforms.hpp"

namespace ptkit::detail {

/// Builds a pipeline from a YAML sequence node; `where` prefixes error messages.
TransformPipeline pipeline_from_yaml(const YAML::Node& list, const TransformRegistry& registry,
                                     const std::string& where);

YAML::Node load_yaml(std::string_view text);

}  // namespace ptkit::detail
