// Copyright 2026 The HFLGen Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>
#include <string_view>

#include <openssl/evp.h>

namespace hflgen {

namespace digest_detail {

inline std::string hex_digest(const EVP_MD* md, std::string_view data) {
  unsigned char out[EVP_MAX_MD_SIZE];
  unsigned int size = 0;
  if (EVP_Digest(data.data(), data.size(), out, &size, md, nullptr) != 1) {
    throw std::runtime_error("digest computation failed");
  }
  std::string hex;
  hex.reserve(2 * size);
  char buf[3];
  for (unsigned int i = 0; i < size; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", out[i]);
    hex += buf;
  }
  return hex;
}

}  // namespace digest_detail

inline std::string sha256_hex(std::string_view data) {
  return digest_detail::hex_digest(EVP_sha256(), data);
}

// Object id git assigns to a file with these contents.
inline std::string git_blob_sha1(std::string_view data) {
  std::string blob = "blob " + std::to_string(data.size());
  blob.push_back('\0');
  blob.append(data);
  return digest_detail::hex_digest(EVP_sha1(), blob);
}

}  // namespace hflgen
