#pragma once

#include <string>

#include "docstar/datamodel.hpp"

namespace docstar {

// On-disk bundle format: a directory per server with one binary file per
// structure. Every file starts with the common header
//   magic "DOCSTAR1" | p | alpha | beta | gamma | delta | eta   (8-byte BE)
//   layout tag (1 byte)
// followed by structure-specific dimensions and row-major 8-byte big-endian
// elements. The AC matrix file also carries the cleartext client-id table as
// length-prefixed UTF-8.
inline constexpr char kBundleMagic[9] = "DOCSTAR1";

void save_bundle(const std::string& dir, const ServerBundle& bundle);
ServerBundle load_bundle(const std::string& dir);

} // namespace docstar
