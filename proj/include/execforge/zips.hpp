#pragma once

// Canonical zip packing of file trees: entries sorted by path, stored
// (uncompressed), fixed timestamps. Identical trees always produce
// byte-identical archives, so content digests are stable.

#include <stdexcept>
#include <string>

#include "execforge/difftext.hpp"  // FileTree

namespace execforge {

struct ZipError : std::runtime_error {
    explicit ZipError(const std::string& what) : std::runtime_error(what) {}
};

std::string zip_pack(const FileTree& tree);

// Unpacks an archive produced by zip_pack (stored entries only). CRC
// mismatches or unsupported features throw ZipError.
FileTree zip_unpack(const std::string& bytes);

}  // namespace execforge
