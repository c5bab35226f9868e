#!/usr/bin/env python3
"""Writes trips_100.csv and its independently computed trip_stats golden."""

import math
import random

R = 6371008.8
VMAX = 67.0


def haversine(a, b):
    phi1 = a[0] * (math.pi / 180.0)
    phi2 = b[0] * (math.pi / 180.0)
    dphi = (b[0] - a[0]) * (math.pi / 180.0)
    dlam = (b[1] - a[1]) * (math.pi / 180.0)
    s1 = math.sin(dphi / 2.0)
    s2 = math.sin(dlam / 2.0)
    h = s1 * s1 + math.cos(phi1) * math.cos(phi2) * s2 * s2
    h = min(max(h, 0.0), 1.0)
    return 2.0 * R * math.asin(math.sqrt(h))


def lower_median(xs):
    xs = sorted(xs)
    return xs[(len(xs) - 1) // 2]


def make_trips(rng):
    trips = []
    modes = ["Vehicle", "Vehicle", "Pedestrian", "Unknown"]
    classes = ["W0_14", "W14_26", "W26_plus", "Unknown"]
    providers = ["Fleet", "Consumer", "Unknown"]
    t = 1506902400000
    for i in range(100):
        lat = round(38.8 + rng.random() * 0.3, 6)
        lon = round(-77.1 + rng.random() * 0.3, 6)
        n = rng.randint(2, 40)
        heading = rng.random() * 2 * math.pi
        pts = []
        t += rng.randint(0, 600000)
        tt = t
        for k in range(n):
            pts.append((lat, lon, tt))
            step = rng.choice([1000, 1000, 2000, 5000, 30000])
            tt += step
            speed = rng.random() * 30.0
            d = speed * step / 1000.0
            heading += rng.gauss(0.0, 0.3)
            lat = round(lat + d * math.cos(heading) / 111195.0, 6)
            lon = round(lon + d * math.sin(heading) / (111195.0 * math.cos(math.radians(lat))), 6)
        # A few trips carry a teleport that the outlier filter must drop.
        if i % 17 == 5 and n > 3:
            la, lo, tm = pts[n // 2]
            pts[n // 2] = (round(la + 0.2, 6), lo, tm)
        trips.append({
            "id": "fx%03d" % i,
            "device": "dev%02d" % (i % 23),
            "mode": modes[i % len(modes)],
            "wc": classes[i % len(classes)],
            "prov": providers[i % len(providers)],
            "pts": pts,
        })
    return trips


def filter_outliers(pts):
    kept = []
    for p in pts:
        if not kept:
            kept.append(p)
            continue
        last = kept[-1]
        if p[2] > last[2]:
            keep = haversine(last, p) / ((p[2] - last[2]) / 1000.0) <= VMAX
        else:
            keep = p[2] == last[2] and haversine(last, p) == 0.0
        if keep:
            kept.append(p)
    return kept


def main():
    rng = random.Random(20171002)
    trips = make_trips(rng)
    with open("trips_100.csv", "w", newline="\n") as f:
        f.write("trip_id,device_id,mode,weight_class,provider,lat,lon,t_ms\n")
        for tr in trips:
            for la, lo, tm in tr["pts"]:
                f.write("%s,%s,%s,%s,%s,%.6f,%.6f,%d\n" %
                        (tr["id"], tr["device"], tr["mode"], tr["wc"], tr["prov"], la, lo, tm))
    with open("trip_stats_100.golden.csv", "w", newline="\n") as f:
        f.write("trip_id,device_id,n_waypoints,duration_s,length_m,median_lapse_s,median_spacing_m\n")
        for tr in trips:
            pts = filter_outliers(tr["pts"])
            if len(pts) < 2:
                continue
            spac = [haversine(pts[k - 1], pts[k]) for k in range(1, len(pts))]
            laps = [(pts[k][2] - pts[k - 1][2]) / 1000.0 for k in range(1, len(pts))]
            length = 0.0
            for d in spac:
                length += d
            dur = (pts[-1][2] - pts[0][2]) / 1000.0
            f.write("%s,%s,%d,%.6f,%.6f,%.6f,%.6f\n" %
                    (tr["id"], tr["device"], len(pts), dur, length,
                     lower_median(laps), lower_median(spac)))


if __name__ == "__main__":
    main()
