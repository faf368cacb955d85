#pragma once

#include <json.hpp>

#include "graphdisc/graph.hpp"

namespace graphdisc {
struct Ket;

namespace detail {

// Ket wire form: one entry per vertex. A bare integer is a single photon of
// that color, [] a vacant vertex, [[color, count], ...] the general case.
nlohmann::json ket_to_json(const Ket& k);
Ket ket_from_json(const nlohmann::json& j);

// Strict-schema guard: any key outside `allowed` raises parse_error naming
// both the key and the enclosing object.
void check_keys(const nlohmann::json& obj, std::initializer_list<const char*> allowed,
                const char* where);

}  // namespace detail
}  // namespace graphdisc
