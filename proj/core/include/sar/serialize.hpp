#pragma once

#include <cstdint>
#include <string>

#include "sar/metrics.hpp"
#include "sar/tensor.hpp"
#include "sar/train.hpp"

#include "json.hpp"

namespace sar {

// %.17g — doubles round-trip exactly through this
std::string format_full(double v);

// header class_id,dim_0..dim_{D-1}, one row per class
void write_anchor_csv(const std::string& path, const Tensor2D& rows);

// header class_id,c_0..c_{C-1}; NaN entries serialize as empty cells
void write_square_matrix_csv(const std::string& path, const Tensor2D& m);

nlohmann::json metrics_to_json(const MetricsReport& report);
nlohmann::json step_record_to_json(const StepRecord& rec);
StepRecord step_record_from_json(const nlohmann::json& j);

void write_text_file(const std::string& path, const std::string& content);

// FNV-1a over a file's bytes
std::uint64_t file_checksum(const std::string& path);

// FNV-1a over sorted relative paths and contents of every regular file
// under root; two trees with identical content hash identically
std::uint64_t tree_checksum(const std::string& root);

} // namespace sar
