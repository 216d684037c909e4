#include "fedsim/qstore.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "fedsim/errors.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

std::string_view to_string(QMode m) { return m == QMode::PerDevice ? "PerDevice" : "SharedPerTier"; }

QMode parse_qmode(std::string_view s) {
  if (s == "PerDevice" || s == "per_device") return QMode::PerDevice;
  if (s == "SharedPerTier" || s == "shared_per_tier") return QMode::SharedPerTier;
  throw ConfigError("unknown Q-store mode '" + std::string(s) + "'");
}

QStore::QStore(QMode mode, ActionSpace actions, const Fleet& fleet, std::uint64_t init_seed,
               double init_scale)
    : mode_(mode), actions_(std::move(actions)), init_seed_(init_seed), init_scale_(init_scale) {
  if (actions_.size() > 256) throw ConfigError("at most 256 actions supported");
  for (const auto& d : fleet) device_tiers_.push_back(d.tier);
}

std::size_t QStore::owner(std::size_t device) const {
  if (device >= device_tiers_.size()) throw LookupError("device " + std::to_string(device) + " unknown to Q-store");
  return mode_ == QMode::PerDevice ? device : static_cast<std::size_t>(device_tiers_[device]);
}

std::uint64_t QStore::key(std::size_t owner, std::size_t g, std::size_t l, std::size_t a) const {
  if (a >= actions_.size()) throw LookupError("action index out of range");
  return (((static_cast<std::uint64_t>(owner) << 10 | g) << 7 | l) << 8) | a;
}

double QStore::initial_value(std::size_t owner, const GlobalState& g, const LocalState& l,
                             std::size_t action) const {
  const auto h = derive_seed({init_seed_, static_cast<std::uint64_t>(mode_), owner, g.index(),
                              l.index(), action});
  return init_scale_ * hash_unit(h);
}

double QStore::get(std::size_t device, const GlobalState& g, const LocalState& l,
                   std::size_t action) const {
  const auto o = owner(device);
  auto it = table_.find(key(o, g.index(), l.index(), action));
  return it != table_.end() ? it->second : initial_value(o, g, l, action);
}

void QStore::set(std::size_t device, const GlobalState& g, const LocalState& l, std::size_t action,
                 double value) {
  if (!std::isfinite(value)) throw ContractViolation("Q values must be finite");
  table_[key(owner(device), g.index(), l.index(), action)] = value;
}

std::size_t QStore::argmax(const DeviceProfile& p, const GlobalState& g, const LocalState& l) const {
  std::size_t best = actions_.size();
  double best_v = 0.0;
  for (std::size_t a = 0; a < actions_.size(); ++a) {
    if (!actions_.available(p, a)) continue;
    const double v = get(p.id, g, l, a);
    if (best == actions_.size() || v > best_v) {
      best = a;
      best_v = v;
    }
  }
  if (best == actions_.size()) throw LookupError("device " + std::to_string(p.id) + " supports no action");
  return best;
}

double QStore::max_value(const DeviceProfile& p, const GlobalState& g, const LocalState& l) const {
  return get(p.id, g, l, argmax(p, g, l));
}

namespace {

std::string format_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double parse_double(std::string_view s) {
  double v = 0.0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size())
    throw ConfigError("bad number '" + std::string(s) + "' in Q-store snapshot");
  return v;
}

std::unordered_map<std::string, std::string> split_fields(const std::string& line) {
  std::unordered_map<std::string, std::string> kv;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) {
    auto eq = tok.find('=');
    if (eq == std::string::npos) throw ConfigError("malformed Q-store field '" + tok + "'");
    kv[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  return kv;
}

template <std::size_t N>
std::array<std::uint8_t, N> parse_bins(const std::array<StateField, N>& fields,
                                       std::unordered_map<std::string, std::string>& kv) {
  std::array<std::uint8_t, N> v{};
  for (std::size_t i = 0; i < N; ++i) {
    auto it = kv.find(std::string(fields[i].name));
    if (it == kv.end()) throw ConfigError("Q-store record missing field " + std::string(fields[i].name));
    bool found = false;
    for (std::size_t b = 0; b < fields[i].bins.size(); ++b)
      if (fields[i].bins[b] == it->second) {
        v[i] = static_cast<std::uint8_t>(b);
        found = true;
      }
    if (!found) throw ConfigError("unknown bin '" + it->second + "' for " + std::string(fields[i].name));
    kv.erase(it);
  }
  return v;
}

}  // namespace

void QStore::save(std::ostream& out) const {
  out << "# fedsim q-store v1\n";
  out << "mode=" << to_string(mode_) << " init_seed=" << init_seed_
      << " init_scale=" << format_double(init_scale_) << " actions=";
  for (std::size_t a = 0; a < actions_.size(); ++a) out << (a ? "," : "") << actions_.name(a);
  out << '\n';
  for (const auto& [k, v] : table_) {
    const std::size_t a = k & 0xff;
    const std::size_t l = (k >> 8) & 0x7f;
    const std::size_t g = (k >> 15) & 0x3ff;
    const std::size_t o = static_cast<std::size_t>(k >> 25);
    out << "owner=";
    if (mode_ == QMode::PerDevice)
      out << o;
    else
      out << to_string(static_cast<Tier>(o));
    out << ' ' << describe(GlobalState::from_index(g)) << ' ' << describe(LocalState::from_index(l))
        << " action=" << actions_.name(a) << " value=" << format_double(v) << '\n';
  }
}

void QStore::load(std::istream& in) {
  std::string line;
  bool header = false;
  std::map<std::uint64_t, double> loaded;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto kv = split_fields(line);
    if (!header) {
      if (kv.at("mode") != to_string(mode_)) throw ConfigError("Q-store snapshot mode mismatch");
      std::string names;
      for (std::size_t a = 0; a < actions_.size(); ++a) names += (a ? "," : "") + actions_.name(a);
      if (kv.at("actions") != names) throw ConfigError("Q-store snapshot action set mismatch");
      header = true;
      continue;
    }
    std::size_t o = 0;
    const auto& os = kv.at("owner");
    if (mode_ == QMode::PerDevice) {
      o = static_cast<std::size_t>(parse_double(os));
      if (o >= device_tiers_.size()) throw ConfigError("Q-store snapshot names unknown device " + os);
    } else {
      o = static_cast<std::size_t>(parse_tier(os));
    }
    kv.erase("owner");
    auto gv = parse_bins<6>(global_fields(), kv);
    auto lv = parse_bins<4>(local_fields(), kv);
    GlobalState g{gv[0], gv[1], gv[2], gv[3], gv[4], gv[5]};
    LocalState l{lv[0], lv[1], lv[2], lv[3]};
    const auto a = actions_.parse(kv.at("action"));
    const double v = parse_double(kv.at("value"));
    if (!std::isfinite(v)) throw ConfigError("non-finite value in Q-store snapshot");
    loaded[key(o, g.index(), l.index(), a)] = v;
  }
  if (!header) throw ConfigError("Q-store snapshot has no header");
  table_ = std::move(loaded);
}

}  // namespace fedsim
