#pragma once

#include <cstdint>
#include <vector>

#include "fedlorar/engine.hpp"
#include "fedlorar/tensor.hpp"

namespace fedlorar {

inline constexpr std::uint16_t kProtocolVersion = 1;

enum class MessageKind : std::uint8_t {
    Hello = 1, // client_id, |D_i|
    GlobalModel = 2, // round t, w
    Update = 3, // round t, ClientUpdate
    Shutdown = 4,
};

struct Message {
    MessageKind kind = MessageKind::Shutdown;
    std::uint16_t protocol_version = kProtocolVersion;

    // Hello
    std::uint32_t client_id = 0;
    std::uint64_t train_size = 0;
    // GlobalModel / Update
    std::uint32_t round = 0;
    ParamVector model; // GlobalModel payload
    ClientUpdate update; // Update payload
};

Message hello_message(std::uint32_t client_id, std::uint64_t train_size);
Message global_model_message(std::uint32_t round, ParamVector w);
Message update_message(std::uint32_t round, ClientUpdate update);
Message shutdown_message();

// Length-prefixed frame: 4-byte LE length of everything after the length
// field, 1-byte kind tag, 2-byte LE version, payload. ParamVector payloads
// are a 4-byte LE dim followed by dim 8-byte LE IEEE-754 doubles; scalars
// are 8-byte LE doubles.
std::vector<std::uint8_t> encode(const Message& msg);

// Inverse of encode over one complete frame. Throws TruncatedFrame,
// MalformedFrame, or VersionMismatch; never aborts on arbitrary bytes.
Message decode(const std::vector<std::uint8_t>& bytes);

} // namespace fedlorar
