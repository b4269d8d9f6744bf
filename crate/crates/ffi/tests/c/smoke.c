#include <math.h>
#include <stdio.h>
#include <string.h>

#include "stocknet.h"

int main(int argc, char **argv) {
    if (argc < 2) {
        fprintf(stderr, "usage: smoke NETWORK_FILE\n");
        return 2;
    }
    SnNetwork *net = NULL;
    if (sn_network_load("/no/such/file", &net) != SN_STATUS_IO || net != NULL) {
        fprintf(stderr, "expected io error\n");
        return 1;
    }
    if (strlen(sn_last_error()) == 0) {
        return 1;
    }
    if (sn_network_load(argv[1], &net) != SN_STATUS_OK) {
        fprintf(stderr, "load: %s\n", sn_last_error());
        return 1;
    }
    SnNetworkStats st;
    if (sn_network_stats(net, &st) != SN_STATUS_OK) {
        return 1;
    }
    size_t needed = 0;
    char id[64];
    if (sn_network_node_id(net, 0, id, sizeof id, &needed) != SN_STATUS_OK) {
        return 1;
    }
    double x[200], y[200];
    unsigned s = 12345u;
    double lx = 0.0, ly = 0.0;
    for (int t = 0; t < 200; t++) {
        s = s * 1103515245u + 12345u;
        double e1 = ((s >> 8) % 2001) / 1000.0 - 1.0;
        s = s * 1103515245u + 12345u;
        double e2 = ((s >> 8) % 2001) / 1000.0 - 1.0;
        ly += (t > 0 ? x[t - 1] - (t > 1 ? x[t - 2] : 0.0) : 0.0) + 0.3 * e2;
        lx += e1;
        x[t] = lx;
        y[t] = ly;
    }
    SnGrangerConfig cfg;
    sn_granger_config_default(&cfg);
    SnGrangerResult r;
    if (sn_granger_test(x, y, 200, &cfg, &r) != SN_STATUS_OK || !r.tested || isnan(r.p_value)) {
        return 1;
    }
    printf("%s %zu %zu %s %d %.6g\n", sn_version(), st.node_count, st.edge_count, id, (int)r.reject, r.p_value);
    sn_network_free(net);
    return 0;
}
