#pragma once

#include <filesystem>

#include <json.hpp>

#include "edgeprobe/task.hpp"

namespace edgeprobe {

nlohmann::json to_json(const TaskSpec& spec);
TaskSpec task_spec_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ExampleRecord& record);
ExampleRecord example_from_json(const nlohmann::json& j);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const nlohmann::json& j, const std::filesystem::path& path);

}  // namespace edgeprobe
