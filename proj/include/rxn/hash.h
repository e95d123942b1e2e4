#ifndef RXN_HASH_H_
#define RXN_HASH_H_

#include <string>
#include <string_view>

namespace rxn {

// Lower-case hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

}  // namespace rxn

#endif  // RXN_HASH_H_
