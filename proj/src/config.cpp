#include "dbose/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dbose {

namespace {

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stod(item));
  }
  if (out.empty()) throw std::invalid_argument("empty list value");
  return out;
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += format_double(v[i]);
  }
  return s;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void Config::set(const std::string& key, const std::string& value) {
  if (key == "n") n = std::stoi(value);
  else if (key == "theta") theta = std::stod(value);
  else if (key == "a") a = std::stod(value);
  else if (key == "eps_list") eps_list = parse_list(value);
  else if (key == "t_list") t_list = parse_list(value);
  else if (key == "mollifier.profile") mollifier_profile = value;
  else if (key == "mollifier.table") mollifier_table = value;
  else if (key == "grid.L") grid_L = std::stod(value);
  else if (key == "grid.Lc") grid_Lc = std::stod(value);
  else if (key == "grid.md") grid_md = std::stoi(value);
  else if (key == "grid.mc") grid_mc = std::stoi(value);
  else if (key == "grid.mr") grid_mr = std::stoi(value);
  else if (key == "mmax") mmax = std::stoi(value);
  else if (key == "lmax") lmax = std::stoi(value);
  else if (key == "nsamples") nsamples = std::stoi(value);
  else if (key == "march.nu") march_nu = std::stoi(value);
  else if (key == "dt") dt = std::stod(value);
  else if (key == "seed") seed = std::stoull(value);
  else if (key == "out.dir") out_dir = value;
  else throw std::invalid_argument("unknown config key: " + key);
}

std::string Config::canonical() const {
  std::ostringstream os;
  os << "a=" << format_double(a) << "\n";
  os << "dt=" << format_double(dt) << "\n";
  os << "eps_list=" << join(eps_list) << "\n";
  os << "grid.L=" << format_double(grid_L) << "\n";
  os << "grid.Lc=" << format_double(grid_Lc) << "\n";
  os << "grid.mc=" << grid_mc << "\n";
  os << "grid.md=" << grid_md << "\n";
  os << "grid.mr=" << grid_mr << "\n";
  os << "lmax=" << lmax << "\n";
  os << "march.nu=" << march_nu << "\n";
  os << "mmax=" << mmax << "\n";
  os << "mollifier.profile=" << mollifier_profile << "\n";
  os << "mollifier.table=" << mollifier_table << "\n";
  os << "n=" << n << "\n";
  os << "nsamples=" << nsamples << "\n";
  os << "out.dir=" << out_dir << "\n";
  os << "seed=" << seed << "\n";
  os << "t_list=" << join(t_list) << "\n";
  os << "theta=" << format_double(theta) << "\n";
  return os.str();
}

std::uint64_t Config::hash() const {
  const std::string s = canonical();
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

Config load_config(const std::string& path,
                   const std::vector<std::string>& overrides) {
  Config cfg;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      const auto pos = line.find('=');
      if (pos == std::string::npos)
        throw std::invalid_argument("bad config line: " + line);
      cfg.set(line.substr(0, pos), line.substr(pos + 1));
    }
  }
  for (const auto& ov : overrides) {
    const auto pos = ov.find('=');
    if (pos == std::string::npos)
      throw std::invalid_argument("bad override (want key=value): " + ov);
    cfg.set(ov.substr(0, pos), ov.substr(pos + 1));
  }
  return cfg;
}

}  // namespace dbose
