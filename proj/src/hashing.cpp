#include "qs/hashing.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "qs/errors.hpp"

namespace qs {

uint64_t hash_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorClass::Dependency, "hash_file: cannot open " + path.string());
    Fnv1a64 h;
    char buf[1 << 16];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
        h.update(buf, static_cast<size_t>(in.gcount()));
    return h.digest();
}

std::string hash_hex(uint64_t h) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

} // namespace qs
