#pragma once

#include "dynamoe/model.hpp"

#include <string>

namespace dynamoe {

/// Binary checkpoint layout (all integers little-endian):
///   bytes 0..7   magic "DMOECKPT"
///   u32          format version (1)
///   u64          manifest length in bytes
///   ...          manifest: UTF-8 JSON (config echo, seed, epoch)
///   u32          number of parameter blobs
///   per blob:    u32 name length, name bytes,
///                u8 scalar width in bytes (8 = float64),
///                u64 rows, u64 cols,
///                rows*cols little-endian float64 values (column-major)
void save_checkpoint(const Model& model, const std::string& path,
                     const std::string& manifest_json);

/// Loads parameters into a model constructed with a matching config.
/// Returns the manifest JSON.
std::string load_checkpoint(Model& model, const std::string& path);

}  // namespace dynamoe
