#pragma once

#include <string>
#include <string_view>

#include "privaros/digest.hpp"

namespace privaros {

// Abstract signature scheme with a deterministic instantiation. Signatures
// are integrity/authenticity tags recomputable from the public identity: the
// simulator models tampering and key mismatch, not cryptographic forgery.
// Only holders of a KeyPair have an API path to sign.
using PublicKey = Digest;
using Signature = Digest;

struct KeyPair {
    Digest secret{};
    PublicKey pub{};
};

inline KeyPair make_keypair(std::string_view seed) {
    KeyPair kp;
    kp.secret = sha256(std::string("privaros.key.secret\x00", 20) + std::string(seed));
    kp.pub = sha256(std::string("privaros.key.public\x00", 20) + digest_view(kp.secret));
    return kp;
}

inline Signature sign(const KeyPair& key, std::string_view message) {
    return sha256(std::string("privaros.sig\x00", 13) + digest_view(key.pub) + std::string(message));
}

inline bool verify(const PublicKey& pub, std::string_view message, const Signature& sig) {
    return sig == sha256(std::string("privaros.sig\x00", 13) + digest_view(pub) + std::string(message));
}

}  // namespace privaros
