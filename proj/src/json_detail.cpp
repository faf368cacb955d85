#include "graphdisc/json_detail.hpp"

#include <algorithm>

#include "graphdisc/state.hpp"

namespace graphdisc::detail {

using nlohmann::json;

json ket_to_json(const Ket& k) {
  json arr = json::array();
  for (const auto& slot : k.occ) {
    if (slot.size() == 1 && slot[0].second == 1) {
      arr.push_back(slot[0].first);
    } else {
      json pairs = json::array();
      for (auto [c, n] : slot) pairs.push_back(json::array({c, n}));
      arr.push_back(pairs);
    }
  }
  return arr;
}

Ket ket_from_json(const json& j) {
  if (!j.is_array()) throw parse_error("ket must be an array with one entry per vertex");
  Ket k;
  for (const json& slot : j) {
    std::vector<std::pair<int, int>> occ;
    if (slot.is_number_integer()) {
      occ.emplace_back(slot.get<int>(), 1);
    } else if (slot.is_array()) {
      for (const json& pair : slot) {
        if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number_integer() ||
            !pair[1].is_number_integer())
          throw parse_error("ket occupation entries must be [color, count] pairs");
        const int c = pair[0].get<int>();
        const int n = pair[1].get<int>();
        if (n < 1) throw parse_error("ket occupation counts must be >= 1");
        occ.emplace_back(c, n);
      }
    } else {
      throw parse_error("ket entry must be a color or a [color, count] list");
    }
    std::sort(occ.begin(), occ.end());
    for (size_t i = 1; i < occ.size(); ++i)
      if (occ[i].first == occ[i - 1].first)
        throw parse_error("ket entry repeats a color");
    k.occ.push_back(std::move(occ));
  }
  return k;
}

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const char* where) {
  if (!obj.is_object()) throw parse_error(std::string(where) + " must be a JSON object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) { ok = true; break; }
    if (!ok) throw parse_error(std::string("unknown key '") + it.key() + "' in " + where);
  }
}

}  // namespace graphdisc::detail
