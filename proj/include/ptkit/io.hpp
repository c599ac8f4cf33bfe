#pragma once

#include <filesystem>
#include <iosfwd>

#include "ptkit/core.hpp"
#include "ptkit/protocol.hpp"

namespace ptkit {

enum class CloudFormat {
  kAuto,      ///< by extension: ".ply" is ASCII PLY, anything else TP3C
  kPlyAscii,
  kBinary,    ///< "TP3C": u32 N, u32 F, f32 positions, f32 features, i32 labels
};

/// ASCII PLY: x, y, z required; an integer "label" property becomes labels;
/// every other vertex property becomes a feature column, in header order.
PointCloud read_ply(std::istream& in);
void write_ply(const PointCloud& cloud, std::ostream& out);

/// Labels are always stored; a cloud without labels is written as all-ignore
/// and reads back without labels.
PointCloud read_tp3c(std::istream& in);
void write_tp3c(const PointCloud& cloud, std::ostream& out);

PointCloud read_cloud(const std::filesystem::path& path, CloudFormat format = CloudFormat::kAuto);
void write_cloud(const PointCloud& cloud, const std::filesystem::path& path,
                 CloudFormat format = CloudFormat::kAuto);

/// "TP3F": u32 N, u32 D, then N x D f32 row-major.
Matrix read_features(std::istream& in);
void write_features(const Matrix& features, std::ostream& out);
Matrix read_features(const std::filesystem::path& path);
void write_features(const Matrix& features, const std::filesystem::path& path);

/// "TP3P": u32 region count, then per region u32 member count, u32 C,
/// i64 member indices and f32 probability rows. `num_points` sizes the host cloud.
PredictionSet read_predictions(std::istream& in, Index num_points);
void write_predictions(const PredictionSet& preds, std::ostream& out);
PredictionSet read_predictions(const std::filesystem::path& path, Index num_points);
void write_predictions(const PredictionSet& preds, const std::filesystem::path& path);

}  // namespace ptkit
