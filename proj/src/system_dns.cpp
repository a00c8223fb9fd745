#include <arpa/nameser.h>
#include <netinet/in.h>
#include <resolv.h>

#include <cstring>

#include "pageprobe/delivery.hpp"
#include "pageprobe/error.hpp"

namespace pageprobe {

std::vector<std::string> SystemNsResolver::authoritative_ns(std::string_view domain) const {
  struct __res_state state;
  std::memset(&state, 0, sizeof state);
  if (res_ninit(&state) != 0) throw Error(ErrorCode::ResolverFailure, "resolver init failed");
  state.retrans = 2;
  state.retry = 1;

  std::string name(domain);
  unsigned char answer[NS_PACKETSZ * 4];
  int len = res_nquery(&state, name.c_str(), ns_c_in, ns_t_ns, answer, sizeof answer);
  if (len < 0) {
    res_nclose(&state);
    throw Error(ErrorCode::ResolverFailure, "NS query failed for " + name);
  }

  std::vector<std::string> out;
  ns_msg msg;
  if (ns_initparse(answer, len, &msg) == 0) {
    int count = ns_msg_count(msg, ns_s_an);
    for (int i = 0; i < count; ++i) {
      ns_rr rr;
      if (ns_parserr(&msg, ns_s_an, i, &rr) != 0 || ns_rr_type(rr) != ns_t_ns) continue;
      char host[NS_MAXDNAME];
      if (dn_expand(ns_msg_base(msg), ns_msg_end(msg), ns_rr_rdata(rr), host, sizeof host) >= 0) {
        out.emplace_back(host);
      }
    }
  }
  res_nclose(&state);
  if (out.empty()) throw Error(ErrorCode::ResolverFailure, "no NS records for " + name);
  return out;
}

}  // namespace pageprobe
