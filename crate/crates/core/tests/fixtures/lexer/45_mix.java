/* license-free header */
public class Mix45 {
    String url() {
        return "http://example.org/path // not a comment";
    }
    String block() { return "/* also not a comment */"; }

    long numbers() {
        long big = 1_000_000L;
        double h = 0x1.8p1;
        int bin = 0b1010_1010;
        float f = 3.5e-2f;
        return big + (long) h + bin + (long) f;
    }

    String kind(int n) {
        return switch (n) {
            case 1 -> "one";
            case 2 -> { yield "two"; }
            default -> "many";
        };
    }
}
