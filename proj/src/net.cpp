#include "fedlorar/net.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cstring>
#include <map>
#include <thread>

#include "fedlorar/errors.hpp"
#include "fedlorar/wire.hpp"

namespace fedlorar {

namespace {

// Owning socket handle.
class Socket {
public:
    Socket() = default;
    explicit Socket(int fd) : fd_(fd) {}
    Socket(Socket&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }
    Socket& operator=(Socket&& other) noexcept {
        if (this != &other) {
            close_fd();
            fd_ = other.fd_;
            other.fd_ = -1;
        }
        return *this;
    }
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;
    ~Socket() { close_fd(); }

    int fd() const { return fd_; }
    bool valid() const { return fd_ >= 0; }

private:
    void close_fd() {
        if (fd_ >= 0) ::close(fd_);
        fd_ = -1;
    }
    int fd_ = -1;
};

void write_all(int fd, const std::uint8_t* data, std::size_t size) {
    while (size > 0) {
        const ssize_t n = ::send(fd, data, size, MSG_NOSIGNAL);
        if (n <= 0) throw ClientDisconnected("send failed: " + std::string(std::strerror(errno)));
        data += n;
        size -= static_cast<std::size_t>(n);
    }
}

void read_exact(int fd, std::uint8_t* data, std::size_t size) {
    while (size > 0) {
        const ssize_t n = ::recv(fd, data, size, 0);
        if (n == 0) throw ClientDisconnected("peer closed connection");
        if (n < 0) throw ClientDisconnected("recv failed: " + std::string(std::strerror(errno)));
        data += n;
        size -= static_cast<std::size_t>(n);
    }
}

void send_message(int fd, const Message& msg) {
    const auto frame = encode(msg);
    write_all(fd, frame.data(), frame.size());
}

Message recv_message(int fd) {
    std::vector<std::uint8_t> frame(4);
    read_exact(fd, frame.data(), 4);
    std::uint32_t length = 0;
    for (int i = 0; i < 4; ++i) length |= static_cast<std::uint32_t>(frame[i]) << (8 * i);
    if (length > 0x7fffffffU) throw MalformedFrame("declared length exceeds 2^31-1");
    frame.resize(4 + length);
    read_exact(fd, frame.data() + 4, length);
    return decode(frame);
}

Socket make_listener(const std::string& bind_addr, int port) {
    Socket sock(::socket(AF_INET, SOCK_STREAM, 0));
    if (!sock.valid()) throw ClientDisconnected("socket() failed");
    int one = 1;
    ::setsockopt(sock.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    if (::inet_pton(AF_INET, bind_addr.c_str(), &addr.sin_addr) != 1) {
        throw InvalidConfig("bad bind address: " + bind_addr);
    }
    if (::bind(sock.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        throw ClientDisconnected("bind failed: " + std::string(std::strerror(errno)));
    }
    if (::listen(sock.fd(), 64) != 0) {
        throw ClientDisconnected("listen failed");
    }
    return sock;
}

class SocketClientEndpoint : public ClientEndpoint {
public:
    SocketClientEndpoint(Socket sock, int client_id)
        : sock_(std::move(sock)), client_id_(client_id) {}

    int client_id() const override { return client_id_; }

    ClientUpdate run_round(std::size_t round, const ParamVector& global_w,
                           std::uint64_t /*seed*/) override {
        send_message(sock_.fd(), global_model_message(static_cast<std::uint32_t>(round), global_w));
        Message msg = recv_message(sock_.fd());
        if (msg.kind != MessageKind::Update) {
            throw MalformedFrame("expected Update from client " + std::to_string(client_id_));
        }
        if (msg.round != round) {
            throw MalformedFrame("client " + std::to_string(client_id_) + " answered round " +
                                 std::to_string(msg.round) + " during round " +
                                 std::to_string(round));
        }
        return std::move(msg.update);
    }

    void shutdown() override {
        try {
            send_message(sock_.fd(), shutdown_message());
        } catch (const ClientDisconnected&) {
            // already gone; nothing left to tear down
        }
    }

private:
    Socket sock_;
    int client_id_;
};

} // namespace

FederatedResult run_server(const std::string& bind_addr, int port, const ModelSpec& model,
                           const AlgorithmSpec& algo, std::size_t num_clients, std::uint64_t seed,
                           std::size_t eval_every, const DevEvaluator& dev_eval) {
    if (num_clients == 0) throw EmptyPopulation("run_server: num_clients must be >= 1");
    Socket listener = make_listener(bind_addr, port);

    std::map<int, SocketClientEndpoint> clients; // keyed by client_id
    while (clients.size() < num_clients) {
        Socket conn(::accept(listener.fd(), nullptr, nullptr));
        if (!conn.valid()) throw ClientDisconnected("accept failed");
        int one = 1;
        ::setsockopt(conn.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
        Message hello = recv_message(conn.fd());
        if (hello.kind != MessageKind::Hello) {
            throw MalformedFrame("expected Hello as first client message");
        }
        const int id = static_cast<int>(hello.client_id);
        if (clients.count(id)) {
            throw MalformedFrame("duplicate Hello for client " + std::to_string(id));
        }
        clients.emplace(id, SocketClientEndpoint(std::move(conn), id));
    }

    std::vector<ClientEndpoint*> endpoints;
    endpoints.reserve(clients.size());
    for (auto& [id, ep] : clients) endpoints.push_back(&ep);
    return run_round_loop(model, algo, endpoints, seed, eval_every, dev_eval);
}

void run_client(const std::string& server_addr, int port, int client_id,
                const ClientDataset& dataset, const ModelSpec& model, const AlgorithmSpec& algo,
                std::uint64_t seed) {
    Socket sock(::socket(AF_INET, SOCK_STREAM, 0));
    if (!sock.valid()) throw ClientDisconnected("socket() failed");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    if (::inet_pton(AF_INET, server_addr.c_str(), &addr.sin_addr) != 1) {
        throw InvalidConfig("bad server address: " + server_addr);
    }
    // retry briefly so client processes may start before the server binds
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(15);
    while (::connect(sock.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        if (std::chrono::steady_clock::now() >= deadline) {
            throw ClientDisconnected("connect failed: " + std::string(std::strerror(errno)));
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
        Socket retry(::socket(AF_INET, SOCK_STREAM, 0));
        sock = std::move(retry);
    }
    int one = 1;
    ::setsockopt(sock.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));

    send_message(sock.fd(),
                 hello_message(static_cast<std::uint32_t>(client_id), dataset.train.size));
    for (;;) {
        Message msg = recv_message(sock.fd());
        if (msg.kind == MessageKind::Shutdown) break;
        if (msg.kind != MessageKind::GlobalModel) {
            throw MalformedFrame("expected GlobalModel or Shutdown from server");
        }
        const std::uint64_t rseed = round_seed(seed, msg.round);
        ClientUpdate update =
            local_training(client_id, msg.model, dataset, model, algo, rseed);
        send_message(sock.fd(), update_message(msg.round, std::move(update)));
    }
}

} // namespace fedlorar
