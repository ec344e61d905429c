#include "fedlorar/wire.hpp"

#include <cstring>
#include <limits>

#include "fedlorar/errors.hpp"

namespace fedlorar {

Message hello_message(std::uint32_t client_id, std::uint64_t train_size) {
    Message m;
    m.kind = MessageKind::Hello;
    m.client_id = client_id;
    m.train_size = train_size;
    return m;
}

Message global_model_message(std::uint32_t round, ParamVector w) {
    Message m;
    m.kind = MessageKind::GlobalModel;
    m.round = round;
    m.model = std::move(w);
    return m;
}

Message update_message(std::uint32_t round, ClientUpdate update) {
    Message m;
    m.kind = MessageKind::Update;
    m.round = round;
    m.update = std::move(update);
    return m;
}

Message shutdown_message() { return Message{}; }

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    put_u64(out, bits);
}

void put_vector(std::vector<std::uint8_t>& out, const ParamVector& v) {
    if (v.size() > std::numeric_limits<std::uint32_t>::max()) {
        throw PayloadTooLarge("vector dim exceeds u32");
    }
    put_u32(out, static_cast<std::uint32_t>(v.size()));
    for (double d : v) put_f64(out, d);
}

// Bounds-checked cursor over the payload bytes.
class Reader {
public:
    Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

    std::uint16_t u16() {
        need(2);
        std::uint16_t v = static_cast<std::uint16_t>(data_[pos_] | (data_[pos_ + 1] << 8));
        pos_ += 2;
        return v;
    }

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }

    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
        pos_ += 8;
        return v;
    }

    double f64() {
        const std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, sizeof(v));
        return v;
    }

    ParamVector vec() {
        const std::uint32_t dim = u32();
        // reject dims the remaining payload cannot possibly hold
        if (static_cast<std::uint64_t>(dim) * 8 > size_ - pos_) {
            throw TruncatedFrame("vector payload shorter than its dim");
        }
        ParamVector out(dim);
        for (auto& d : out) d = f64();
        return out;
    }

    std::size_t remaining() const { return size_ - pos_; }

private:
    void need(std::size_t n) {
        if (size_ - pos_ < n) throw TruncatedFrame("payload ended early");
    }

    const std::uint8_t* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

} // namespace

std::vector<std::uint8_t> encode(const Message& msg) {
    std::vector<std::uint8_t> body;
    body.push_back(static_cast<std::uint8_t>(msg.kind));
    put_u16(body, msg.protocol_version);
    switch (msg.kind) {
    case MessageKind::Hello:
        put_u32(body, msg.client_id);
        put_u64(body, msg.train_size);
        break;
    case MessageKind::GlobalModel:
        put_u32(body, msg.round);
        put_vector(body, msg.model);
        break;
    case MessageKind::Update: {
        const ClientUpdate& u = msg.update;
        put_u32(body, msg.round);
        put_u32(body, static_cast<std::uint32_t>(u.client_id));
        put_u64(body, u.train_size);
        put_f64(body, u.weighted_loss_reduction);
        put_vector(body, u.epoch_losses);
        put_vector(body, u.delta);
        break;
    }
    case MessageKind::Shutdown:
        break;
    default:
        throw MalformedFrame("encode: unknown message kind");
    }
    if (body.size() > 0x7fffffffULL) throw PayloadTooLarge("frame exceeds 2^31-1 bytes");
    std::vector<std::uint8_t> frame;
    frame.reserve(body.size() + 4);
    put_u32(frame, static_cast<std::uint32_t>(body.size()));
    frame.insert(frame.end(), body.begin(), body.end());
    return frame;
}

Message decode(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 4) throw TruncatedFrame("missing length prefix");
    std::uint32_t length = 0;
    for (int i = 0; i < 4; ++i) length |= static_cast<std::uint32_t>(bytes[i]) << (8 * i);
    if (length > 0x7fffffffU) throw MalformedFrame("declared length exceeds 2^31-1");
    if (bytes.size() - 4 < length) throw TruncatedFrame("frame shorter than declared length");
    if (bytes.size() - 4 > length) throw MalformedFrame("trailing bytes after frame");
    if (length < 3) throw MalformedFrame("frame too short for kind and version");

    Message msg;
    const std::uint8_t tag = bytes[4];
    msg.protocol_version = static_cast<std::uint16_t>(bytes[5] | (bytes[6] << 8));
    if (msg.protocol_version != kProtocolVersion) {
        throw VersionMismatch("protocol version " + std::to_string(msg.protocol_version));
    }
    Reader payload(bytes.data() + 7, length - 3);
    switch (tag) {
    case static_cast<std::uint8_t>(MessageKind::Hello):
        msg.kind = MessageKind::Hello;
        msg.client_id = payload.u32();
        msg.train_size = payload.u64();
        break;
    case static_cast<std::uint8_t>(MessageKind::GlobalModel):
        msg.kind = MessageKind::GlobalModel;
        msg.round = payload.u32();
        msg.model = payload.vec();
        break;
    case static_cast<std::uint8_t>(MessageKind::Update): {
        msg.kind = MessageKind::Update;
        msg.round = payload.u32();
        msg.update.client_id = static_cast<int>(payload.u32());
        msg.update.train_size = payload.u64();
        msg.update.weighted_loss_reduction = payload.f64();
        msg.update.epoch_losses = payload.vec();
        msg.update.delta = payload.vec();
        break;
    }
    case static_cast<std::uint8_t>(MessageKind::Shutdown):
        msg.kind = MessageKind::Shutdown;
        break;
    default:
        throw MalformedFrame("unknown kind tag " + std::to_string(tag));
    }
    if (payload.remaining() != 0) throw MalformedFrame("unconsumed payload bytes");
    return msg;
}

} // namespace fedlorar
