#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mononet/conv.hpp"
#include "mononet/model.hpp"

namespace mononet {

// Versioned binary model container (".mnet"). Little-endian, self-describing:
// magic "MNET", format version, model kind, layer structure, then row-major
// f64 parameter payloads written byte-exactly.
enum class ModelKind : std::uint8_t { Tabular = 1, Hierarchical = 2 };

std::vector<std::uint8_t> serialize_model(const Model& m);
std::vector<std::uint8_t> serialize_model(const HierModel& m);

ModelKind peek_kind(const std::vector<std::uint8_t>& bytes);
Model deserialize_tabular(const std::vector<std::uint8_t>& bytes);
HierModel deserialize_hierarchical(const std::vector<std::uint8_t>& bytes);

void save_model(const Model& m, const std::string& path);
void save_model(const HierModel& m, const std::string& path);
ModelKind peek_kind_file(const std::string& path);
Model load_tabular(const std::string& path);
HierModel load_hierarchical(const std::string& path);

} // namespace mononet
