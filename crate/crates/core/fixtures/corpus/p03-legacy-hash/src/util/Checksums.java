package util;

import java.security.MessageDigest;

public class Checksums {
    public static byte[] md5(byte[] data) throws Exception {
        MessageDigest md = MessageDigest.getInstance("MD5");
        md.update(data);
        return md.digest();
    }

    public static MessageDigest start() throws Exception {
        MessageDigest md = MessageDigest.getInstance("SHA-512");
        return md;
    }
}
