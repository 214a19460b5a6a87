// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>

namespace ragrl::hash {

std::string sha1_hex(std::string_view data);
std::string sha256_hex(std::string_view data);

/// Object id git would assign to a blob with this content.
std::string git_blob_id(std::string_view content);

}  // namespace ragrl::hash
